//! The fitted expansion `y*(ξ) = Σ c_α Ψ_α(ξ)`: prediction, closed-form
//! mean and variance, relative errors and kernel density estimates of the
//! output.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisExport, BasisSet};
use crate::error::{Error, Result};
use crate::gmm::ParameterGroups;
use crate::sampler::AdaptiveRun;

/// Descriptive fields stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateMetadata {
    pub d: usize,
    pub p: usize,
    pub s: usize,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    pub m_used: usize,
}

/// Closed-form output statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub variance: f64,
}

impl Stats {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SparseSurrogate {
    basis: BasisSet,
    coefficients: DVector<f64>,
    support: Vec<usize>,
    metadata: SurrogateMetadata,
}

/// Rows evaluated per batch in [`SparseSurrogate::predict`].
const PREDICT_CHUNK: usize = 4096;

impl SparseSurrogate {
    pub fn new(basis: BasisSet, coefficients: DVector<f64>, metadata: SurrogateMetadata) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Usage(format!(
                "{} coefficients for {} basis functions",
                coefficients.len(),
                basis.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite surrogate coefficient".into()));
        }
        let support: Vec<usize> = (0..coefficients.len()).filter(|&j| coefficients[j] != 0.0).collect();
        if support.len() > metadata.s {
            return Err(Error::Usage(format!(
                "{} nonzero coefficients exceed the sparsity {}",
                support.len(),
                metadata.s
            )));
        }
        Ok(Self {
            basis,
            coefficients,
            support,
            metadata,
        })
    }

    /// Packages the outcome of an adaptive run.
    pub fn from_run(basis: BasisSet, run: &AdaptiveRun, strategy: Option<&str>) -> Result<Self> {
        let metadata = SurrogateMetadata {
            d: basis.dimension(),
            p: basis.order(),
            s: run.sparsity.max(run.support.len()),
            epsilon: run.epsilon,
            strategy: strategy.map(str::to_owned),
            m_used: run.selected.len(),
        };
        Self::new(basis, run.coefficients.clone(), metadata)
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn metadata(&self) -> &SurrogateMetadata {
        &self.metadata
    }

    /// `Φ(points) c*`, evaluating only the basis functions up to the last
    /// support position.
    pub fn predict(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        if points.ncols() != self.basis.dimension() {
            return Err(Error::Usage(format!(
                "points have {} columns, model dimension is {}",
                points.ncols(),
                self.basis.dimension()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("non-finite prediction point".into()));
        }
        let rows = points.nrows();
        let mut out = DVector::zeros(rows);
        let Some(&last) = self.support.last() else {
            return Ok(out);
        };
        let lead = self.coefficients.rows(0, last + 1).into_owned();
        let mut start = 0;
        while start < rows {
            let len = PREDICT_CHUNK.min(rows - start);
            let block = points.rows(start, len).into_owned();
            let phi = self.basis.eval_leading(&block, last + 1)?;
            out.rows_mut(start, len).copy_from(&(phi * &lead));
            start += len;
        }
        Ok(out)
    }

    /// Mean `c₀` and variance `Σ_{α≠0} c_α²`, valid for an orthonormal basis
    /// with `Ψ₀ ≡ 1`.
    pub fn stats(&self) -> Stats {
        Stats {
            mean: self.coefficients[0],
            variance: self.coefficients.iter().skip(1).map(|c| c * c).sum(),
        }
    }

    /// `‖Φc − y‖₂ / ‖y‖₂` for a caller-supplied design and responses.
    pub fn relative_error(&self, phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<RelativeError> {
        if phi.ncols() != self.coefficients.len() || phi.nrows() != y.len() {
            return Err(Error::Usage(format!(
                "design {}×{} does not match {} responses and {} coefficients",
                phi.nrows(),
                phi.ncols(),
                y.len(),
                self.coefficients.len()
            )));
        }
        Ok(relative_error(&(phi * &self.coefficients), y))
    }

    /// Output samples `y*(ξ)` for `count` draws of `law`.
    pub fn sample_outputs(&self, law: &ParameterGroups, count: usize, seed: u64) -> Result<DVector<f64>> {
        self.predict(&law.sample(count, seed)?)
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            basis: self.basis.export(),
            coefficients: SparseCoefficients {
                support: self.support.clone(),
                values: self.support.iter().map(|&j| self.coefficients[j]).collect(),
            },
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self> {
        let basis = BasisSet::from_export(&file.basis)?;
        let sc = &file.coefficients;
        if sc.support.len() != sc.values.len() {
            return Err(Error::Validation("support and values differ in length".into()));
        }
        let mut c = DVector::zeros(basis.len());
        for (&j, &v) in sc.support.iter().zip(&sc.values) {
            if j >= basis.len() {
                return Err(Error::Validation(format!("coefficient index {j} outside the basis")));
            }
            c[j] = v;
        }
        Self::new(basis, c, file.metadata.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_model_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_model_file(&serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseCoefficients {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

/// Self-contained model serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub basis: BasisExport,
    pub coefficients: SparseCoefficients,
    pub metadata: SurrogateMetadata,
}

/// Relative error; when `y = 0` the value is the absolute `‖prediction‖₂`
/// and `absolute` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeError {
    pub value: f64,
    pub absolute: bool,
}

pub fn relative_error(prediction: &DVector<f64>, y: &DVector<f64>) -> RelativeError {
    let r = (prediction - y).norm();
    let yn = y.norm();
    if yn > 0.0 {
        RelativeError {
            value: r / yn,
            absolute: false,
        }
    } else {
        RelativeError {
            value: r,
            absolute: true,
        }
    }
}

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Bandwidth {
    /// `0.9 min(σ, IQR/1.34) n^{-1/5}`.
    #[default]
    Silverman,
    Fixed(f64),
}

pub const KDE_GRID_POINTS: usize = 512;
/// Grid margin beyond the data range, in bandwidths.
const KDE_MARGIN: f64 = 6.0;
/// Kernel support cut-off, in bandwidths.
const KDE_CUTOFF: f64 = 9.0;

/// Gaussian KDE on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

impl DensityEstimate {
    /// Trapezoid-rule integral of the estimate over its grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density\n");
        for (x, y) in self.grid.iter().zip(&self.density) {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        out
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule; falls back to the larger spread measure, then to a
/// tiny multiple of the location, when the data are degenerate.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sigma = var.sqrt();
    let iqr = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.34;
    let spread = match sigma.min(iqr) {
        s if s > 0.0 => s,
        _ => sigma.max(iqr),
    };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-9 * mean.abs().max(1.0)
    }
}

/// Gaussian kernel density estimate of `samples` on
/// [`KDE_GRID_POINTS`] points spanning the data plus a margin.
pub fn kde(samples: &[f64], bandwidth: Bandwidth) -> Result<DensityEstimate> {
    if samples.is_empty() {
        return Err(Error::Usage("density estimate needs samples".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite sample in density estimate".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(&sorted),
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::Usage(format!("bandwidth must be positive, got {h}"))),
    };
    let lo = sorted[0] - KDE_MARGIN * h;
    let hi = sorted[sorted.len() - 1] + KDE_MARGIN * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let eval = |x: f64| {
        let a = sorted.partition_point(|&v| v < x - KDE_CUTOFF * h);
        let b = sorted.partition_point(|&v| v <= x + KDE_CUTOFF * h);
        norm * sorted[a..b]
            .iter()
            .map(|&v| {
                let u = (x - v) / h;
                (-0.5 * u * u).exp()
            })
            .sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    let density: Vec<f64> = {
        use rayon::prelude::*;
        grid.par_iter().map(|&x| eval(x)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let density: Vec<f64> = grid.iter().map(|&x| eval(x)).collect();
    Ok(DensityEstimate {
        grid,
        density,
        bandwidth: h,
        n_samples: sorted.len(),
    })
}

/// Relative prominence a local maximum needs to count as a mode.
pub const MODE_PROMINENCE: f64 = 0.02;

/// Number of local maxima that rise and fall by at least
/// `MODE_PROMINENCE · max(values)`.
pub fn count_modes(values: &[f64]) -> usize {
    let Some(top) = values.iter().copied().reduce(f64::max) else {
        return 0;
    };
    let delta = MODE_PROMINENCE * top;
    if !(delta > 0.0) {
        return 0;
    }
    let mut count = 0;
    let mut rising = true;
    let mut base = values[0];
    let mut peak = values[0];
    let mut valley = values[0];
    for &v in values {
        if rising {
            if v > peak {
                peak = v;
            } else if v < peak - delta {
                if peak - base >= delta {
                    count += 1;
                }
                rising = false;
                valley = v;
            }
        } else if v < valley {
            valley = v;
        } else if v > valley + delta {
            rising = true;
            base = valley;
            peak = v;
        }
    }
    if rising && peak - base >= delta {
        count += 1;
    }
    count
}

/// Accuracy and statistics of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub training_error: Option<f64>,
    pub testing_error: f64,
    pub mean: f64,
    pub std: f64,
    pub m_used: usize,
    #[serde(skip)]
    pub density: Option<DensityEstimate>,
}

impl ValidationReport {
    /// JSON summary with keys `mean`, `std`, `train_err`, `test_err`,
    /// `m_used`, plus the density settings when a density was computed.
    pub fn summary_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "mean": self.mean,
            "std": self.std,
            "train_err": self.training_error,
            "test_err": self.testing_error,
            "m_used": self.m_used,
        });
        if let Some(d) = &self.density {
            v["density"] = serde_json::json!({
                "n_samples": d.n_samples,
                "bandwidth": d.bandwidth,
                "grid_points": d.grid.len(),
            });
        }
        v
    }
}

/// Testing error on held-out `(points, y)` plus closed-form statistics.
pub fn validate(
    model: &SparseSurrogate,
    points: &DMatrix<f64>,
    y: &DVector<f64>,
    training_error: Option<f64>,
) -> Result<ValidationReport> {
    if points.nrows() != y.len() {
        return Err(Error::Usage(format!(
            "{} points for {} responses",
            points.nrows(),
            y.len()
        )));
    }
    let testing = relative_error(&model.predict(points)?, y);
    let stats = model.stats();
    Ok(ValidationReport {
        training_error,
        testing_error: testing.value,
        mean: stats.mean,
        std: stats.std(),
        m_used: model.metadata.m_used,
        density: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, EpsPolicy};
    use crate::gmm::{GaussianComponent, GaussianMixture};

    fn bimodal_1d() -> GaussianMixture {
        let c =
            |m: f64| GaussianComponent::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, 0.25)).unwrap();
        GaussianMixture::new(vec![0.5, 0.5], vec![c(-2.0), c(2.0)]).unwrap()
    }

    fn model(coeffs: &[f64], s: usize) -> SparseSurrogate {
        let mix = GaussianMixture::standard_normal(2).unwrap();
        let basis = build_basis(&mix, 2, &EpsPolicy::default()).unwrap();
        let mut c = DVector::zeros(basis.len());
        for (i, v) in coeffs.iter().enumerate() {
            c[i] = *v;
        }
        let md = SurrogateMetadata {
            d: 2,
            p: 2,
            s,
            epsilon: 0.0,
            strategy: None,
            m_used: 0,
        };
        SparseSurrogate::new(basis, c, md).unwrap()
    }

    #[test]
    fn constant_model_predicts_constant() {
        let m = model(&[3.0], 1);
        let pts = GaussianMixture::standard_normal(2).unwrap().sample(50, 1).unwrap();
        assert!(m.predict(&pts).unwrap().iter().all(|&v| v == 3.0));
        assert_eq!(
            m.stats(),
            Stats {
                mean: 3.0,
                variance: 0.0
            }
        );
    }

    #[test]
    fn stats_sum_of_squares() {
        let s = model(&[0.0, 1.0, 1.0], 2).stats();
        assert_eq!((s.mean, s.variance), (0.0, 2.0));
    }

    #[test]
    fn prediction_is_linear() {
        let a = model(&[0.5, -1.0, 0.0, 2.0], 3);
        let b = model(&[1.5, -3.0, 0.0, 6.0], 3);
        let pts = GaussianMixture::standard_normal(2).unwrap().sample(20, 2).unwrap();
        let pa = a.predict(&pts).unwrap() * 3.0;
        let pb = b.predict(&pts).unwrap();
        assert!((pa - pb).norm() < 1e-12);
    }

    #[test]
    fn sparsity_enforced() {
        let mix = GaussianMixture::standard_normal(1).unwrap();
        let basis = build_basis(&mix, 1, &EpsPolicy::default()).unwrap();
        let md = SurrogateMetadata {
            d: 1,
            p: 1,
            s: 1,
            epsilon: 0.0,
            strategy: None,
            m_used: 0,
        };
        assert!(SparseSurrogate::new(basis, DVector::from_vec(vec![1.0, 1.0]), md).is_err());
    }

    #[test]
    fn relative_error_cases() {
        let y = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(relative_error(&y, &y).value, 0.0);
        assert_eq!(relative_error(&DVector::zeros(2), &y).value, 1.0);
        let e = relative_error(&DVector::from_vec(vec![3.0, 5.0]), &y);
        assert!((e.value - 0.2).abs() < 1e-15);
        let z = relative_error(&y, &DVector::zeros(2));
        assert!(z.absolute && z.value == 5.0);
    }

    #[test]
    fn model_json_round_trip() {
        let m = model(&[0.5, 0.0, -1.0, 0.0, 0.25], 3);
        let back = SparseSurrogate::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.support(), &[0, 2, 4]);
        let pts = GaussianMixture::standard_normal(2).unwrap().sample(30, 3).unwrap();
        assert_eq!(m.predict(&pts).unwrap(), back.predict(&pts).unwrap());
    }

    #[test]
    fn kde_normalizes_and_finds_two_modes() {
        let mix = bimodal_1d();
        let x = mix.sample(20_000, 4).unwrap();
        let est = kde(x.as_slice(), Bandwidth::Silverman).unwrap();
        assert_eq!(est.grid.len(), KDE_GRID_POINTS);
        assert!((est.integral() - 1.0).abs() < 1e-3);
        assert_eq!(count_modes(&est.density), 2);
    }

    #[test]
    fn kde_of_constant_is_a_spike() {
        let est = kde(&vec![2.0; 1000], Bandwidth::Silverman).unwrap();
        assert!(est.bandwidth < 1e-8);
        assert!((est.integral() - 1.0).abs() < 1e-3);
        let peak = est.density.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 1e7);
        assert_eq!(count_modes(&est.density), 1);
    }

    #[test]
    fn silverman_reference_value() {
        let mut v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        v.sort_by(f64::total_cmp);
        let sd = (v.iter().map(|x| (x - 49.5) * (x - 49.5)).sum::<f64>() / 99.0).sqrt();
        let iqr = (74.25 - 24.75) / 1.34;
        let want = 0.9 * sd.min(iqr) * 100f64.powf(-0.2);
        assert!((silverman_bandwidth(&v) - want).abs() < 1e-12);
    }

    #[test]
    fn mode_counting() {
        assert_eq!(count_modes(&[0.0, 1.0, 0.0, 1.0, 0.0]), 2);
        assert_eq!(count_modes(&[0.0, 1.0, 0.999, 1.0, 0.0]), 1);
        assert_eq!(count_modes(&[0.0, 0.5, 1.0]), 1);
        assert_eq!(count_modes(&[0.0; 4]), 0);
    }

    #[test]
    fn report_summary_keys() {
        let m = model(&[1.0, 0.5], 2);
        let pts = GaussianMixture::standard_normal(2).unwrap().sample(10, 5).unwrap();
        let y = m.predict(&pts).unwrap();
        let r = validate(&m, &pts, &y, Some(0.0)).unwrap();
        assert_eq!(r.testing_error, 0.0);
        let j = r.summary_json();
        for k in ["mean", "std", "train_err", "test_err", "m_used"] {
            assert!(j.get(k).is_some(), "{k}");
        }
    }
}
