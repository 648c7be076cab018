use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use ttpce::basis::{build_grouped_basis, BasisSet, EpsPolicy};
use ttpce::gmm::{MixtureSpec, ParameterGroups};
use ttpce::sampler::{run_adaptive, AdaptiveConfig, CandidatePool, Strategy};
use ttpce::surrogate::{count_modes, kde, relative_error, Bandwidth, SparseSurrogate};

pub type DemoResult<T> = std::result::Result<T, String>;

/// Largest grid side accepted from the page.
pub const MAX_GRID: usize = 512;
pub const MAX_ORDER: usize = 6;
const POOL_SIZE: usize = 400;
const TEST_POINTS: usize = 2000;
const DENSITY_POINTS: usize = 5000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    /// `[xmin, xmax, ymin, ymax]`.
    pub fn from_slice(b: &[f64]) -> DemoResult<Self> {
        let &[xmin, xmax, ymin, ymax] = b else {
            return Err("bounds must be [xmin, xmax, ymin, ymax]".into());
        };
        if !(xmin < xmax && ymin < ymax) || b.iter().any(|v| !v.is_finite()) {
            return Err("bounds must be finite with min < max".into());
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    fn points(&self, nx: usize, ny: usize) -> DemoResult<DMatrix<f64>> {
        if !(2..=MAX_GRID).contains(&nx) || !(2..=MAX_GRID).contains(&ny) {
            return Err(format!("grid sides must lie in 2..={MAX_GRID}"));
        }
        let hx = (self.xmax - self.xmin) / (nx - 1) as f64;
        let hy = (self.ymax - self.ymin) / (ny - 1) as f64;
        Ok(DMatrix::from_fn(nx * ny, 2, |r, c| {
            if c == 0 {
                self.xmin + hx * (r % nx) as f64
            } else {
                self.ymin + hy * (r / nx) as f64
            }
        }))
    }
}

pub fn load_law(spec: &str) -> DemoResult<ParameterGroups> {
    let law = MixtureSpec::from_json(spec).map_err(err)?.build().map_err(err)?;
    if law.dimension() != 2 {
        return Err(format!(
            "the demo draws two-dimensional laws, got dimension {}",
            law.dimension()
        ));
    }
    Ok(law)
}

fn basis(law: &ParameterGroups, p: usize) -> DemoResult<BasisSet> {
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(format!("order must lie in 1..={MAX_ORDER}"));
    }
    build_grouped_basis(law, p, &EpsPolicy::default()).map_err(err)
}

pub fn density_grid(spec: &str, bounds: &Bounds, nx: usize, ny: usize) -> DemoResult<Vec<f64>> {
    let law = load_law(spec)?;
    let pts = bounds.points(nx, ny)?;
    (0..pts.nrows())
        .map(|r| law.density(&[pts[(r, 0)], pts[(r, 1)]]).map_err(err))
        .collect()
}

pub fn basis_labels(spec: &str, p: usize) -> DemoResult<String> {
    let b = basis(&load_law(spec)?, p)?;
    let labels: Vec<String> = b.index_set().indices().iter().map(|a| a.to_text()).collect();
    serde_json::to_string(&labels).map_err(err)
}

pub fn basis_grid(spec: &str, p: usize, index: usize, bounds: &Bounds, nx: usize, ny: usize) -> DemoResult<Vec<f64>> {
    let b = basis(&load_law(spec)?, p)?;
    if index >= b.len() {
        return Err(format!("basis index {index} out of range 0..{}", b.len()));
    }
    let phi = b.eval_leading(&bounds.points(nx, ny)?, index + 1).map_err(err)?;
    Ok(phi.column(index).iter().copied().collect())
}

/// Response fitted by [`fit_demo`].
pub fn response(x: &[f64]) -> f64 {
    x[0] + 0.25 * x[1] + 0.1 * x[0] * x[1]
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct HistoryPoint {
    pub m: usize,
    pub training_error: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub strategy: String,
    pub n: usize,
    pub m_used: usize,
    pub support_size: usize,
    pub training_error: f64,
    pub test_error: f64,
    pub mean: f64,
    pub std: f64,
    pub modes: usize,
    pub reference_modes: usize,
    pub history: Vec<HistoryPoint>,
    pub selected: Vec<[f64; 2]>,
    pub surrogate: Curve,
    pub reference: Curve,
}

pub fn fit_report(spec: &str, p: usize, strategy: &str, budget: usize, seed: u64) -> DemoResult<FitReport> {
    let law = load_law(spec)?;
    let b = basis(&law, p)?;
    let strategy: Strategy = strategy.parse().map_err(err)?;
    let n = b.len();
    let pool = CandidatePool::sample(&b, &law, POOL_SIZE.max(2 * n), seed).map_err(err)?;
    let config = AdaptiveConfig {
        initial: n,
        max_samples: budget.max(n),
        strategy,
        sparsity: Some(n),
        training_tolerance: 1e-12,
        seed,
        ..AdaptiveConfig::default()
    };
    let mut oracle = |x: &[f64]| Ok(response(x));
    let run = run_adaptive(&pool, &config, &mut oracle).map_err(err)?;
    let model = SparseSurrogate::from_run(b, &run, Some(strategy.as_str())).map_err(err)?;

    let test = law.sample(TEST_POINTS, seed.wrapping_add(1)).map_err(err)?;
    let truth = |pts: &DMatrix<f64>| DVector::from_fn(pts.nrows(), |r, _| response(&[pts[(r, 0)], pts[(r, 1)]]));
    let test_error = relative_error(&model.predict(&test).map_err(err)?, &truth(&test)).value;

    let pts = law.sample(DENSITY_POINTS, seed.wrapping_add(2)).map_err(err)?;
    let sur = kde(model.predict(&pts).map_err(err)?.as_slice(), Bandwidth::Silverman).map_err(err)?;
    let reference = kde(truth(&pts).as_slice(), Bandwidth::Fixed(sur.bandwidth)).map_err(err)?;
    let stats = model.stats();
    Ok(FitReport {
        strategy: strategy.to_string(),
        n,
        m_used: run.selected.len(),
        support_size: run.support.len(),
        training_error: run.training_error(),
        test_error,
        mean: stats.mean,
        std: stats.std(),
        modes: count_modes(&sur.density),
        reference_modes: count_modes(&reference.density),
        history: run
            .history
            .iter()
            .map(|h| HistoryPoint {
                m: h.m,
                training_error: h.training_error,
            })
            .collect(),
        selected: run
            .selected
            .iter()
            .map(|&i| [pool.points()[(i, 0)], pool.points()[(i, 1)]])
            .collect(),
        surrogate: Curve {
            grid: sur.grid,
            density: sur.density,
        },
        reference: Curve {
            grid: reference.grid,
            density: reference.density,
        },
    })
}

pub fn fit_demo(spec: &str, p: usize, strategy: &str, budget: usize, seed: u64) -> DemoResult<String> {
    serde_json::to_string(&fit_report(spec, p, strategy, budget, seed)?).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BIMODAL: &str = r#"{"dimension": 2, "groups": [{"indices": [0, 1], "kind": "mixture",
        "weights": [0.5, 0.5], "means": [[-2.0, 0.5], [2.0, -0.5]],
        "covariances": [[[0.3, 0.15], [0.15, 0.3]], [[0.3, -0.12], [-0.12, 0.3]]]}]}"#;

    fn bounds() -> Bounds {
        Bounds::from_slice(&[-4.0, 4.0, -3.0, 3.0]).unwrap()
    }

    #[test]
    fn density_integrates_to_about_one() {
        let (nx, ny) = (161, 121);
        let g = density_grid(BIMODAL, &bounds(), nx, ny).unwrap();
        let cell = (8.0 / (nx - 1) as f64) * (6.0 / (ny - 1) as f64);
        let total: f64 = g.iter().sum::<f64>() * cell;
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn constant_basis_function_is_one() {
        let g = basis_grid(BIMODAL, 2, 0, &bounds(), 5, 4).unwrap();
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let labels: Vec<String> = serde_json::from_str(&basis_labels(BIMODAL, 2).unwrap()).unwrap();
        assert_eq!(labels.len(), 6);
        assert!(basis_grid(BIMODAL, 2, 6, &bounds(), 5, 4).is_err());
    }

    #[test]
    fn fit_recovers_the_response() {
        let r = fit_report(BIMODAL, 2, "d", 12, 3).unwrap();
        assert!(r.test_error < 1e-8, "{}", r.test_error);
        assert_eq!(r.reference_modes, 2);
        assert_eq!(r.modes, 2);
        assert!(serde_json::from_str::<serde_json::Value>(&fit_demo(BIMODAL, 2, "hybrid", 10, 1).unwrap()).is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Bounds::from_slice(&[1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(density_grid(BIMODAL, &bounds(), 1, 4).is_err());
        assert!(fit_report(BIMODAL, 2, "z", 10, 0).is_err());
        let three = r#"{"dimension": 1, "groups": [{"indices": [0], "kind": "gaussian", "mean": 0.0, "std": 1.0}]}"#;
        assert!(load_law(three).is_err());
    }
}
