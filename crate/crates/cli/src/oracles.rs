//! Builtin benchmark functions with known ground truth.
//!
//! * `synthetic8d`: an eight-dimensional three-component mixture and the
//!   expansion `y = Σ c_α Ψ_α(ξ) + e` over its order-3 basis (165
//!   functions). `c` has 8 nonzeros at seeded positions whose magnitudes
//!   decay geometrically from 1 to 1e-6, with seeded signs. Each call adds
//!   Gaussian noise of standard deviation `1e-6/√200`, so 200 samples carry
//!   noise of norm about 1e-6.
//! * `bimodal`: two well separated Gaussian blobs in two dimensions and
//!   `y = ξ₁ + 0.25 ξ₂ + 0.1 ξ₁ξ₂`; the output density has two peaks.
//! * `quadratic-ill`: a strongly correlated four-dimensional two-component
//!   mixture and `y = ξ₁ξ₂ + Σ_k 10^{-k} ξ_k²`, whose coefficients span four
//!   orders of magnitude.
//! * `file`: responses come from an external simulator through files, see
//!   [`crate::exchange`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use ttpce::basis::{build_basis, BasisSet, EpsPolicy};
use ttpce::gmm::{seeded_rng, stream_rng, GaussianComponent, GaussianMixture, Rng64};
use ttpce::sampler::Oracle;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleName {
    #[serde(rename = "synthetic8d")]
    Synthetic8d,
    #[serde(rename = "bimodal")]
    Bimodal,
    #[serde(rename = "quadratic-ill")]
    QuadraticIll,
    #[serde(rename = "file")]
    File,
}

impl OracleName {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleName::Synthetic8d => "synthetic8d",
            OracleName::Bimodal => "bimodal",
            OracleName::QuadraticIll => "quadratic-ill",
            OracleName::File => "file",
        }
    }
}

impl fmt::Display for OracleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OracleName {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        [
            OracleName::Synthetic8d,
            OracleName::Bimodal,
            OracleName::QuadraticIll,
            OracleName::File,
        ]
        .into_iter()
        .find(|o| o.as_str() == s)
        .ok_or_else(|| CliError::Config(format!("unknown oracle {s:?}")))
    }
}

/// Number of nonzero planted coefficients in `synthetic8d`.
pub const PLANTED_NONZEROS: usize = 8;
/// Smallest planted magnitude; the largest is 1.
pub const PLANTED_SMALLEST: f64 = 1e-6;
/// Norm of the noise vector over a 200-sample design.
pub const SYNTHETIC_NOISE_NORM: f64 = 1e-6;
/// Seed of the planted coefficients used by the CLI oracle.
pub const SYNTHETIC_TRUTH_SEED: u64 = 20_190_808;

/// Sparse coefficients at `k` seeded positions among `n`, magnitudes
/// `largest·r^j` for `j = 0..k` with `r` chosen so the last equals
/// `smallest`, shuffled over positions, with seeded signs.
pub fn planted_geometric(n: usize, k: usize, largest: f64, smallest: f64, seed: u64) -> DVector<f64> {
    let mut rng = stream_rng(seed, 0x7472);
    let mut pos = index::sample(&mut rng, n, k).into_vec();
    pos.sort_unstable();
    let ratio = if k > 1 {
        (smallest / largest).powf(1.0 / (k - 1) as f64)
    } else {
        1.0
    };
    let order = index::sample(&mut rng, k, k).into_vec();
    let mut c = DVector::zeros(n);
    for (slot, &j) in order.iter().zip(&pos) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        c[j] = sign * largest * ratio.powi(*slot as i32);
    }
    c
}

/// Sparse coefficients at `k` seeded positions with magnitudes uniform in
/// `[0.5, 1.5]` and seeded signs.
pub fn planted_uniform(n: usize, k: usize, seed: u64) -> DVector<f64> {
    let mut rng = stream_rng(seed, 0x756e);
    let pos = index::sample(&mut rng, n, k).into_vec();
    let mut c = DVector::zeros(n);
    for j in pos {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        c[j] = sign * (0.5 + rng.random::<f64>());
    }
    c
}

fn toeplitz(d: usize, rho: f64, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| scale * rho.powi((i as i32 - j as i32).abs()))
}

/// The eight-dimensional input law of `synthetic8d`.
pub fn synthetic8d_mixture() -> GaussianMixture {
    let d = 8;
    let comp = |mean: Vec<f64>, cov: DMatrix<f64>| {
        GaussianComponent::new(DVector::from_vec(mean), cov).expect("builtin component is valid")
    };
    let c1 = comp(vec![-1.0; d], toeplitz(d, 0.5, 0.4));
    let c2 = comp(
        (0..d).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect(),
        toeplitz(d, 0.0, 0.3),
    );
    let c3 = comp(vec![0.8; d], toeplitz(d, -0.3, 0.5));
    GaussianMixture::new(vec![0.3, 0.5, 0.2], vec![c1, c2, c3]).expect("builtin mixture is valid")
}

pub fn bimodal_mixture() -> GaussianMixture {
    let c1 = GaussianComponent::new(
        DVector::from_vec(vec![-2.0, 0.5]),
        DMatrix::from_row_slice(2, 2, &[0.3, 0.15, 0.15, 0.3]),
    )
    .expect("builtin component is valid");
    let c2 = GaussianComponent::new(
        DVector::from_vec(vec![2.0, -0.5]),
        DMatrix::from_row_slice(2, 2, &[0.3, -0.12, -0.12, 0.3]),
    )
    .expect("builtin component is valid");
    GaussianMixture::new(vec![0.5, 0.5], vec![c1, c2]).expect("builtin mixture is valid")
}

pub fn quadratic_ill_mixture() -> GaussianMixture {
    let d = 4;
    let c1 = GaussianComponent::new(DVector::from_vec(vec![0.5; d]), toeplitz(d, 0.95, 1.0))
        .expect("builtin component is valid");
    let c2 = GaussianComponent::new(DVector::from_vec(vec![-0.5, 0.0, 0.5, 1.0]), toeplitz(d, 0.9, 0.5))
        .expect("builtin component is valid");
    GaussianMixture::new(vec![0.6, 0.4], vec![c1, c2]).expect("builtin mixture is valid")
}

fn bimodal_fn(x: &[f64]) -> f64 {
    x[0] + 0.25 * x[1] + 0.1 * x[0] * x[1]
}

fn quadratic_ill_fn(x: &[f64]) -> f64 {
    x[0] * x[1] + (0..4).map(|k| 10f64.powi(-(k as i32)) * x[k] * x[k]).sum::<f64>()
}

/// Ground truth of a benchmark.
#[derive(Clone)]
pub enum Truth {
    /// `Σ c_α Ψ_α(ξ)` in the given basis.
    Expansion {
        basis: BasisSet,
        coefficients: DVector<f64>,
    },
    Function(fn(&[f64]) -> f64),
}

/// A builtin benchmark: input law, truth and per-call noise level.
#[derive(Clone)]
pub struct Benchmark {
    pub name: OracleName,
    pub mixture: GaussianMixture,
    /// Order at which the truth is exactly representable.
    pub p: usize,
    pub truth: Truth,
    /// Standard deviation of the additive noise of each call.
    pub noise_sigma: f64,
}

impl Benchmark {
    pub fn builtin(name: OracleName) -> CliResult<Self> {
        match name {
            OracleName::Synthetic8d => Self::synthetic8d(SYNTHETIC_TRUTH_SEED),
            OracleName::Bimodal => Ok(Self {
                name,
                mixture: bimodal_mixture(),
                p: 2,
                truth: Truth::Function(bimodal_fn),
                noise_sigma: 0.0,
            }),
            OracleName::QuadraticIll => Ok(Self {
                name,
                mixture: quadratic_ill_mixture(),
                p: 2,
                truth: Truth::Function(quadratic_ill_fn),
                noise_sigma: 0.0,
            }),
            OracleName::File => Err(CliError::Config("the file oracle has no builtin truth".into())),
        }
    }

    /// `synthetic8d` with the planted coefficients drawn from `truth_seed`.
    pub fn synthetic8d(truth_seed: u64) -> CliResult<Self> {
        let mixture = synthetic8d_mixture();
        let basis = build_basis(&mixture, 3, &EpsPolicy::default())?;
        let coefficients = planted_geometric(basis.len(), PLANTED_NONZEROS, 1.0, PLANTED_SMALLEST, truth_seed);
        Ok(Self::with_expansion(mixture, basis, coefficients))
    }

    /// `synthetic8d`-style benchmark with caller-chosen coefficients.
    pub fn with_expansion(mixture: GaussianMixture, basis: BasisSet, coefficients: DVector<f64>) -> Self {
        Self {
            name: OracleName::Synthetic8d,
            p: basis.order(),
            mixture,
            truth: Truth::Expansion { basis, coefficients },
            noise_sigma: SYNTHETIC_NOISE_NORM / 200f64.sqrt(),
        }
    }

    pub fn planted(&self) -> Option<(&BasisSet, &DVector<f64>)> {
        match &self.truth {
            Truth::Expansion { basis, coefficients } => Some((basis, coefficients)),
            Truth::Function(_) => None,
        }
    }

    /// Noiseless responses at the rows of `points`.
    pub fn exact(&self, points: &DMatrix<f64>) -> CliResult<DVector<f64>> {
        match &self.truth {
            Truth::Expansion { basis, coefficients } => Ok(basis.eval_basis(points)? * coefficients),
            Truth::Function(f) => Ok(DVector::from_iterator(
                points.nrows(),
                (0..points.nrows()).map(|i| f(points.row(i).clone_owned().as_slice())),
            )),
        }
    }

    /// Oracle adding this benchmark's noise from a seeded stream.
    pub fn oracle(&self, seed: u64) -> BenchmarkOracle<'_> {
        BenchmarkOracle {
            bench: self,
            rng: stream_rng(seed, 0x6e6f),
            calls: 0,
        }
    }
}

/// Noisy evaluations of a [`Benchmark`], one point at a time.
pub struct BenchmarkOracle<'a> {
    bench: &'a Benchmark,
    rng: Rng64,
    calls: usize,
}

impl BenchmarkOracle<'_> {
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Oracle for BenchmarkOracle<'_> {
    fn evaluate(&mut self, point: &[f64]) -> ttpce::Result<f64> {
        if point.len() != self.bench.mixture.dimension() {
            return Err(ttpce::Error::Oracle(format!(
                "{} expects {} coordinates, got {}",
                self.bench.name,
                self.bench.mixture.dimension(),
                point.len()
            )));
        }
        self.calls += 1;
        let clean = match &self.bench.truth {
            Truth::Expansion { basis, coefficients } => {
                let mut psi = vec![0.0; basis.len()];
                basis.eval_point_into(point, &mut psi);
                psi.iter().zip(coefficients.iter()).map(|(a, b)| a * b).sum()
            }
            Truth::Function(f) => f(point),
        };
        let noise: f64 = StandardNormal.sample(&mut self.rng);
        Ok(clean + self.bench.noise_sigma * noise)
    }
}

/// Gaussian noise vector of exactly the given Euclidean norm.
pub fn noise_of_norm(len: usize, norm: f64, seed: u64) -> DVector<f64> {
    let mut rng = seeded_rng(seed);
    let e = DVector::from_fn(len, |_, _| StandardNormal.sample(&mut rng));
    let n = e.norm();
    if n > 0.0 {
        e * (norm / n)
    } else {
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_truth_shape() {
        let c = planted_geometric(165, 8, 1.0, 1e-6, 3);
        let mut mags: Vec<f64> = c.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(mags.len(), 8);
        assert!((mags[0] - 1.0).abs() < 1e-15 && (mags[7] - 1e-6).abs() < 1e-18);
        assert_eq!(c, planted_geometric(165, 8, 1.0, 1e-6, 3));
    }

    #[test]
    fn noise_norm_exact() {
        assert!((noise_of_norm(200, 1e-6, 1).norm() - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn names_round_trip() {
        for n in ["synthetic8d", "bimodal", "quadratic-ill", "file"] {
            assert_eq!(n.parse::<OracleName>().unwrap().as_str(), n);
        }
    }

    #[test]
    fn function_oracles_are_noiseless() {
        let b = Benchmark::builtin(OracleName::Bimodal).unwrap();
        let mut o = b.oracle(1);
        assert_eq!(o.evaluate(&[1.0, 2.0]).unwrap(), 1.0 + 0.5 + 0.2);
        assert!(o.evaluate(&[1.0]).is_err());
    }
}
