//! ℓ0-constrained least squares `min ‖Φc − y‖₂ s.t. ‖c‖₀ ≤ s` by CoSaMP,
//! plus the restricted-isometry diagnostic and the sample-count and
//! coefficient-error bounds that depend on it.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::gmm::seeded_rng;
use crate::linalg::{self, least_squares};

/// `Φ c ≈ y` with target sparsity `s` and residual threshold `epsilon`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    phi: DMatrix<f64>,
    y: DVector<f64>,
    s: usize,
    epsilon: f64,
}

impl RegressionProblem {
    pub fn new(phi: DMatrix<f64>, y: DVector<f64>, s: usize, epsilon: f64) -> Result<Self> {
        let m = phi.nrows();
        if m == 0 || phi.ncols() == 0 {
            return Err(Error::Usage("design matrix must be non-empty".into()));
        }
        if y.len() != m {
            return Err(Error::Usage(format!("{} responses for {m} rows", y.len())));
        }
        if s == 0 || s > m || s > phi.ncols() {
            return Err(Error::Usage(format!(
                "sparsity {s} must satisfy 1 ≤ s ≤ min(m = {m}, n = {})",
                phi.ncols()
            )));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Usage(format!("epsilon must be non-negative, got {epsilon}")));
        }
        if phi.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Usage("non-finite entries in Φ or y".into()));
        }
        if 2 * s > m {
            log::warn!("sparsity {s} exceeds m/2 = {}; recovery guarantees are weak", m / 2);
        }
        Ok(Self { phi, y, s, epsilon })
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sparsity(&self) -> usize {
        self.s
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Sparse coefficient vector with its support and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub coefficients: DVector<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Number of least-squares solves that fell back to the minimum-norm
    /// solution.
    pub rank_deficient_solves: usize,
}

impl SparseSolution {
    fn zero(n: usize, residual_norm: f64) -> Self {
        Self {
            coefficients: DVector::zeros(n),
            support: Vec::new(),
            residual_norm,
            iterations: 0,
            rank_deficient_solves: 0,
        }
    }
}

/// Indices of the `k` largest `|v_i|`, ties broken by ascending index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Least squares on the listed columns of `phi`.
pub fn ls_on_support(phi: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<linalg::LeastSquares> {
    if support.len() > phi.nrows() {
        log::warn!(
            "support of {} columns exceeds {} rows; returning the minimum-norm solution",
            support.len(),
            phi.nrows()
        );
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= phi.ncols()) {
        return Err(Error::Usage(format!("support index {bad} out of range")));
    }
    let sub = phi.select_columns(support);
    Ok(least_squares(&sub, y))
}

fn scatter(n: usize, support: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut c = DVector::zeros(n);
    for (&j, v) in support.iter().zip(values.iter()) {
        c[j] = *v;
    }
    c
}

/// CoSaMP. Each iteration forms the proxy `Φᵀ r`, merges its `2s` largest
/// entries with the current support, solves least squares on the merged
/// set, keeps the `s` largest coefficients and re-solves on them. Stops when
/// `‖r‖₂ ≤ ε`, when the support repeats, or after `max_iter` iterations, and
/// returns the iterate with the smallest residual seen (the zero vector
/// included).
pub fn cosamp(problem: &RegressionProblem, max_iter: usize) -> Result<SparseSolution> {
    let (phi, y, s) = (&problem.phi, &problem.y, problem.s);
    let n = phi.ncols();
    let y_norm = y.norm();
    let mut best = SparseSolution::zero(n, y_norm);
    if y_norm <= problem.epsilon {
        return Ok(best);
    }
    let mut support: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut rank_deficient = 0;
    for it in 1..=max_iter {
        let proxy = phi.tr_mul(&residual);
        let mut merged = top_k(proxy.as_slice(), 2 * s);
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        let wide = ls_on_support(phi, y, &merged)?;
        rank_deficient += wide.rank_deficient as usize;
        let keep: Vec<usize> = {
            let mut k: Vec<usize> = top_k(wide.solution.as_slice(), s)
                .into_iter()
                .map(|i| merged[i])
                .collect();
            k.sort_unstable();
            k
        };
        let narrow = ls_on_support(phi, y, &keep)?;
        rank_deficient += narrow.rank_deficient as usize;
        let c = scatter(n, &keep, &narrow.solution);
        residual = y - phi * &c;
        let res = residual.norm();
        if res < best.residual_norm {
            best = SparseSolution {
                support: keep.iter().copied().filter(|&j| c[j] != 0.0).collect(),
                coefficients: c,
                residual_norm: res,
                iterations: it,
                rank_deficient_solves: rank_deficient,
            };
        }
        if res <= problem.epsilon || keep == support {
            break;
        }
        support = keep;
    }
    if best.rank_deficient_solves > 0 {
        log::warn!(
            "{} rank-deficient least-squares solves; minimum-norm solutions used",
            best.rank_deficient_solves
        );
    }
    Ok(best)
}

/// Near-isometry statistics of `(1/m) Φ_Sᵀ Φ_S` maximized over sampled
/// column subsets `S`.
///
/// This only ever sees a few subsets, so `kappa` is a lower bound on the
/// true restricted isometry constant, never a certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipEstimate {
    /// `max_S ‖(1/m) Φ_Sᵀ Φ_S − I‖_F`.
    pub frobenius: f64,
    /// `min_S λ_min`.
    pub lambda_min: f64,
    /// `max_S λ_max`.
    pub lambda_max: f64,
    /// Estimated constant `max(1 − λ_min, λ_max − 1)`.
    pub kappa: f64,
}

/// Statistics over explicitly given subsets.
pub fn rip_on_subsets(phi: &DMatrix<f64>, subsets: &[Vec<usize>]) -> Result<RipEstimate> {
    let m = phi.nrows() as f64;
    let mut est = RipEstimate {
        frobenius: 0.0,
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        kappa: 0.0,
    };
    for cols in subsets {
        if cols.iter().any(|&j| j >= phi.ncols()) {
            return Err(Error::Usage("subset column out of range".into()));
        }
        let sub = phi.select_columns(cols);
        let gram = sub.tr_mul(&sub) / m;
        let dev = &gram - DMatrix::identity(cols.len(), cols.len());
        est.frobenius = est.frobenius.max(dev.norm());
        let (lo, hi) = linalg::symmetric_eig_extremes(&gram);
        est.lambda_min = est.lambda_min.min(lo);
        est.lambda_max = est.lambda_max.max(hi);
    }
    est.kappa = (1.0 - est.lambda_min).max(est.lambda_max - 1.0).max(0.0);
    Ok(est)
}

/// RIP estimate of order `s` from `trials` uniformly drawn column subsets.
pub fn rip_diagnostic(phi: &DMatrix<f64>, s: usize, trials: usize, seed: u64) -> Result<RipEstimate> {
    if trials == 0 {
        return Err(Error::Usage("at least one trial is required".into()));
    }
    if s == 0 || s > phi.ncols() {
        return Err(Error::Usage(format!("subset size {s} outside 1..={}", phi.ncols())));
    }
    let mut rng = seeded_rng(seed);
    let subsets: Vec<Vec<usize>> = (0..trials)
        .map(|_| {
            let mut v = index::sample(&mut rng, phi.ncols(), s).into_vec();
            v.sort_unstable();
            v
        })
        .collect();
    rip_on_subsets(phi, &subsets)
}

/// Samples sufficient for the `(s, κ_s)` restricted isometry to hold with
/// probability `1 − η` when products of basis functions are sub-Gaussian
/// with variance proxy `σ`: `⌈2 ln(2/η) s² σ² / κ_s²⌉`.
pub fn theorem2_sample_bound(sigma: f64, s: usize, kappa_s: f64, eta: f64) -> Result<u64> {
    if !(sigma > 0.0) || s == 0 || !(kappa_s > 0.0 && kappa_s < 1.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Usage("need σ > 0, s ≥ 1, 0 < κ_s < 1 and 0 < η < 1".into()));
    }
    let s = s as f64;
    let bound = 2.0 * (2.0 / eta).ln() * s * s * sigma * sigma / (kappa_s * kappa_s);
    Ok(bound.ceil() as u64)
}

/// Constants of the coefficient-error bound for `m` samples and sparsity
/// `s` under a `(2s, κ₂ₛ)` isometry:
/// `α₀ = 1 + 1.7071 √(1 + κ₂ₛ) / (m (1 − κ₂ₛ) √s)`, `α₁ = 1 / (m (1 − κ₂ₛ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundConstants {
    pub alpha0: f64,
    pub alpha1: f64,
}

impl ErrorBoundConstants {
    /// `None` unless `0 ≤ κ₂ₛ < 1`.
    pub fn new(kappa_2s: f64, m: usize, s: usize) -> Option<Self> {
        if !(0.0..1.0).contains(&kappa_2s) || m == 0 || s == 0 {
            return None;
        }
        let denom = m as f64 * (1.0 - kappa_2s);
        Some(Self {
            alpha0: 1.0 + 1.7071 * (1.0 + kappa_2s).sqrt() / (denom * (s as f64).sqrt()),
            alpha1: 1.0 / denom,
        })
    }

    /// `α₀ ‖c_s − c‖₁ + α₁ (‖e‖₂ + ε)`.
    pub fn bound(&self, tail_l1: f64, noise_norm: f64, epsilon: f64) -> f64 {
        self.alpha0 * tail_l1 + self.alpha1 * (noise_norm + epsilon)
    }
}

/// `‖c − c_s‖₁` where `c_s` keeps the `s` largest-magnitude entries of `c`.
pub fn best_s_term_tail_l1(c: &[f64], s: usize) -> f64 {
    let mut mags: Vec<f64> = c.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    mags.iter().skip(s).sum()
}
