//! Adaptive sample selection: rank-revealing QR initialization from a
//! candidate pool, then one-at-a-time D-, R- or E-optimal acquisition around
//! the sparse solver.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::gmm::{stream_rng, ParameterGroups};
use crate::linalg::{self, pivoted_qr};
use crate::sparse::{cosamp, RegressionProblem};

/// Candidate points `Ω⁰` together with their basis values `Φ⁰`.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    points: DMatrix<f64>,
    phi: DMatrix<f64>,
}

impl CandidatePool {
    pub fn new(points: DMatrix<f64>, phi: DMatrix<f64>) -> Result<Self> {
        if points.nrows() != phi.nrows() {
            return Err(Error::Usage(format!(
                "{} candidate points but {} design rows",
                points.nrows(),
                phi.nrows()
            )));
        }
        if points.nrows() == 0 {
            return Err(Error::Usage("candidate pool is empty".into()));
        }
        Ok(Self { points, phi })
    }

    /// Pool of `size` draws from `law` evaluated in `basis`.
    pub fn sample(basis: &BasisSet, law: &ParameterGroups, size: usize, seed: u64) -> Result<Self> {
        if law.dimension() != basis.dimension() {
            return Err(Error::Usage(format!(
                "law has dimension {}, basis {}",
                law.dimension(),
                basis.dimension()
            )));
        }
        let points = law.sample(size, seed)?;
        let phi = basis.eval_basis(&points)?;
        Self::new(points, phi)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    fn support_row(&self, i: usize, support: &[usize]) -> DVector<f64> {
        DVector::from_iterator(support.len(), support.iter().map(|&j| self.phi[(i, j)]))
    }
}

/// Relative `|R_kk| / |R_00|` below which the pool is treated as rank
/// deficient during initialization.
pub const RRQR_RANK_TOLERANCE: f64 = 1e-10;

/// Rows of `Φ⁰` picked by column-pivoted QR of `(Φ⁰)ᵀ`: the first `m`
/// pivots, in pivot order.
pub fn rrqr_init(pool: &CandidatePool, m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Usage("initial sample count must be positive".into()));
    }
    if m > pool.len() || m > pool.phi.ncols() {
        return Err(Error::Usage(format!(
            "cannot pick {m} rows from a {}×{} candidate design; use a larger pool or a smaller initial m",
            pool.len(),
            pool.phi.ncols()
        )));
    }
    let qr = pivoted_qr(&pool.phi.transpose(), m);
    let lead = qr.r_diagonal.first().map_or(0.0, |v| v.abs());
    if let Some(k) = qr
        .r_diagonal
        .iter()
        .position(|r| !(r.abs() > RRQR_RANK_TOLERANCE * lead))
    {
        return Err(Error::Numerical(format!(
            "candidate design has numerical rank {k} < {m}; use a larger pool or a smaller initial m"
        )));
    }
    Ok(qr.permutation[..m].to_vec())
}

/// Re-verification period of the Sherman–Morrison inverse.
pub const INVERSE_CHECK_PERIOD: usize = 10;
/// Accepted relative deviation of the maintained inverse.
pub const INVERSE_TOLERANCE: f64 = 1e-8;

/// Selected rows, fixed support and the incrementally maintained
/// `(Φ_sᵀΦ_s)⁻¹`.
#[derive(Debug, Clone)]
pub struct AcquisitionState {
    selected: Vec<usize>,
    taken: Vec<bool>,
    support: Vec<usize>,
    gram: DMatrix<f64>,
    gram_inverse: DMatrix<f64>,
    updates_since_check: usize,
    last_check_deviation: f64,
}

fn fresh_inverse(gram: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::spd_inverse(gram).unwrap_or_else(|| {
        log::warn!("support Gram matrix is singular; using its pseudo-inverse");
        gram.clone()
            .pseudo_inverse(linalg::RANK_TOLERANCE * gram.norm().max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| DMatrix::zeros(gram.nrows(), gram.ncols()))
    })
}

impl AcquisitionState {
    pub fn new(pool: &CandidatePool, selected: Vec<usize>, support: Vec<usize>) -> Result<Self> {
        let mut taken = vec![false; pool.len()];
        for &i in &selected {
            if i >= pool.len() {
                return Err(Error::Usage(format!("selected index {i} outside the pool")));
            }
            if std::mem::replace(&mut taken[i], true) {
                return Err(Error::Usage(format!("candidate {i} selected twice")));
            }
        }
        if let Some(&j) = support.iter().find(|&&j| j >= pool.phi.ncols()) {
            return Err(Error::Usage(format!("support index {j} outside the basis")));
        }
        let phi_s = pool.phi.select_rows(&selected).select_columns(&support);
        let gram = phi_s.tr_mul(&phi_s);
        let gram_inverse = fresh_inverse(&gram);
        Ok(Self {
            selected,
            taken,
            support,
            gram,
            gram_inverse,
            updates_since_check: 0,
            last_check_deviation: 0.0,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.taken[i]
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    /// `‖G⁻¹_maintained − G⁻¹_fresh‖_F / ‖G⁻¹_fresh‖_F` at the last
    /// periodic check.
    pub fn last_check_deviation(&self) -> f64 {
        self.last_check_deviation
    }

    pub fn unselected(&self) -> impl Iterator<Item = usize> + '_ {
        self.taken.iter().enumerate().filter(|(_, t)| !**t).map(|(i, _)| i)
    }

    /// `xᵀ(Φ_sᵀΦ_s)⁻¹x` for candidate `i`.
    pub fn leverage(&self, pool: &CandidatePool, i: usize) -> f64 {
        let x = pool.support_row(i, &self.support);
        x.dot(&(&self.gram_inverse * &x))
    }

    /// Appends candidate `i` with a Sherman–Morrison update of the inverse.
    pub fn add(&mut self, pool: &CandidatePool, i: usize) -> Result<()> {
        if i >= pool.len() {
            return Err(Error::Usage(format!("candidate {i} outside the pool")));
        }
        if self.taken[i] {
            return Err(Error::Internal(format!("candidate {i} already selected")));
        }
        let x = pool.support_row(i, &self.support);
        let gx = &self.gram_inverse * &x;
        let denom = 1.0 + x.dot(&gx);
        self.gram_inverse -= &gx * gx.transpose() / denom;
        self.gram += &x * x.transpose();
        self.taken[i] = true;
        self.selected.push(i);
        self.updates_since_check += 1;
        if self.updates_since_check >= INVERSE_CHECK_PERIOD {
            self.reverify();
        }
        Ok(())
    }

    /// Compares the maintained inverse with a fresh one and keeps the fresh
    /// one.
    pub fn reverify(&mut self) {
        let fresh = fresh_inverse(&self.gram);
        self.last_check_deviation = linalg::relative_frobenius(&self.gram_inverse, &fresh);
        if self.last_check_deviation > INVERSE_TOLERANCE {
            log::warn!(
                "Sherman–Morrison inverse drifted by {:.3e}; refactorized",
                self.last_check_deviation
            );
        }
        self.gram_inverse = fresh;
        self.updates_since_check = 0;
    }

    /// Least-squares coefficients on the fixed support,
    /// `(Φ_sᵀΦ_s)⁻¹ Φ_sᵀ y`, scattered into a length-`n` vector.
    pub fn support_coefficients(&self, pool: &CandidatePool, y: &[f64]) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.support.len());
        for (&row, &yk) in self.selected.iter().zip(y) {
            for (t, &j) in self.support.iter().enumerate() {
                rhs[t] += pool.phi[(row, j)] * yk;
            }
        }
        let cs = &self.gram_inverse * rhs;
        let mut c = DVector::zeros(pool.phi.ncols());
        for (t, &j) in self.support.iter().enumerate() {
            c[j] = cs[t];
        }
        c
    }
}

fn argmax_by<F: FnMut(usize) -> f64>(candidates: impl Iterator<Item = usize>, mut score: F) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let v = score(i);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Unselected candidate of largest leverage, ties to the lowest index.
/// `None` once the pool is exhausted.
pub fn d_optimal_next(state: &AcquisitionState, pool: &CandidatePool) -> Option<usize> {
    argmax_by(state.unselected(), |i| state.leverage(pool, i))
}

/// Spectral norm of `(G + xxᵀ)/(m + 1) − I` for every candidate, sharing one
/// eigendecomposition of `G`.
pub struct RipObjective {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    m: usize,
}

impl RipObjective {
    pub fn new(state: &AcquisitionState) -> Self {
        let SymmetricEigen {
            eigenvalues,
            eigenvectors,
        } = state.gram.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        Self {
            eigenvalues: order.iter().map(|&k| eigenvalues[k]).collect(),
            eigenvectors: eigenvectors.select_columns(&order),
            m: state.selected.len(),
        }
    }

    /// Objective for a support-restricted row `x`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let scale = (self.m + 1) as f64;
        if self.eigenvalues.is_empty() {
            return 0.0;
        }
        let z = self.eigenvectors.tr_mul(x);
        let (lo, hi) = rank_one_extremes(&self.eigenvalues, z.as_slice());
        (lo / scale - 1.0).abs().max((hi / scale - 1.0).abs())
    }
}

/// Number of eigenvalues of `diag(d) + zzᵀ` strictly below `lambda`, by
/// Sylvester inertia of the bordered matrix.
fn count_below(d: &[f64], z: &[f64], lambda: f64) -> usize {
    let mut negatives = 0;
    let mut secular = 1.0;
    for (&di, &zi) in d.iter().zip(z) {
        let mut delta = di - lambda;
        if delta == 0.0 {
            delta = -f64::EPSILON * lambda.abs().max(f64::MIN_POSITIVE);
        }
        if delta < 0.0 {
            negatives += 1;
        }
        secular += zi * zi / delta;
    }
    // negatives(Δ) + [f > 0] − 1
    (negatives + usize::from(secular > 0.0)).saturating_sub(1)
}

/// Smallest and largest eigenvalue of `diag(d) + zzᵀ` with `d` ascending.
fn rank_one_extremes(d: &[f64], z: &[f64]) -> (f64, f64) {
    let n = d.len();
    let z2: f64 = z.iter().map(|v| v * v).sum();
    let bisect = |mut lo: f64, mut hi: f64, target: usize| {
        // Smallest λ in [lo, hi] with more than `target` eigenvalues ≤ λ.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_below(d, z, mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let top = d[n - 1] + z2;
    let lo_bracket_hi = if n > 1 { d[1].min(top) } else { top };
    let lam_min = bisect(d[0], lo_bracket_hi.max(d[0]), 0);
    let lam_max = bisect(d[n - 1], top, n - 1);
    (lam_min, lam_max)
}

/// Unselected candidate minimizing `‖(Φ_sᵀΦ_s + xxᵀ)/(m+1) − I‖₂`, ties to
/// the lowest index.
pub fn r_optimal_next(state: &AcquisitionState, pool: &CandidatePool) -> Option<usize> {
    let objective = RipObjective::new(state);
    argmax_by(state.unselected(), |i| {
        -objective.value(&pool.support_row(i, &state.support))
    })
}

/// How cluster residuals are aggregated in E-optimal selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMode {
    /// `|mean(Φc − y)|`.
    #[default]
    SignedMean,
    /// `mean(|Φc − y|)`.
    MeanAbsolute,
}

/// Fixed iteration cap of the k-means clustering.
pub const KMEANS_ITERATIONS: usize = 50;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd k-means with seeded k-means++ initialization. Returns the
/// centers and the assignment of every point. An emptied cluster takes the
/// point of the largest cluster farthest from that cluster's center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if k == 0 || k > points.len() {
        return Err(Error::Usage(format!("k = {k} clusters for {} points", points.len())));
    }
    let mut rng = stream_rng(seed, 0x6b6d);
    // k-means++ seeding: each new center is drawn with probability
    // proportional to its squared distance from the nearest chosen one.
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (w, p) in nearest.iter_mut().zip(points) {
            *w = w.min(squared_distance(p, &points[next]));
        }
    }
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].clone()).collect();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = argmax_by(0..k, |c| -squared_distance(p, &centers[c])).unwrap_or(0);
            changed |= assign[i] != best;
            assign[i] = best;
        }
        loop {
            let mut counts = vec![0usize; k];
            for &a in &assign {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let largest = argmax_by(0..k, |c| counts[c] as f64).unwrap_or(0);
            let far = argmax_by((0..points.len()).filter(|&i| assign[i] == largest), |i| {
                squared_distance(&points[i], &centers[largest])
            })
            .unwrap_or(0);
            assign[far] = empty;
            centers[empty] = points[far].clone();
            changed = true;
        }
        let d = points[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    Ok((centers, assign))
}

/// Clusters the selected points into `k` groups, scores each group by its
/// residual under `mode`, and returns the unselected candidate nearest to
/// the center of the worst group. `residuals[t]` belongs to
/// `state.selected()[t]`.
pub fn e_optimal_next(
    state: &AcquisitionState,
    pool: &CandidatePool,
    residuals: &[f64],
    k: usize,
    mode: ResidualMode,
    seed: u64,
) -> Result<Option<usize>> {
    if residuals.len() != state.selected.len() {
        return Err(Error::Usage(format!(
            "{} residuals for {} selected samples",
            residuals.len(),
            state.selected.len()
        )));
    }
    let points: Vec<Vec<f64>> = state.selected.iter().map(|&i| pool.point(i)).collect();
    let (centers, assign) = kmeans(&points, k, seed)?;
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&a, &r) in assign.iter().zip(residuals) {
        sum[a] += match mode {
            ResidualMode::SignedMean => r,
            ResidualMode::MeanAbsolute => r.abs(),
        };
        count[a] += 1;
    }
    let worst = argmax_by(0..k, |c| (sum[c] / count[c] as f64).abs()).unwrap_or(0);
    let target = &centers[worst];
    Ok(argmax_by(state.unselected(), |i| {
        -squared_distance(&pool.point(i), target)
    }))
}

/// Acquisition rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    D,
    R,
    E,
    /// Rotates D, R, E by iteration.
    Hybrid,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::D,
        Strategy::R,
        Strategy::E,
        Strategy::Hybrid,
        Strategy::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::D => "d",
            Strategy::R => "r",
            Strategy::E => "e",
            Strategy::Hybrid => "hybrid",
            Strategy::Random => "random",
        }
    }

    /// Concrete rule used at 1-based iteration `iter`.
    pub fn rule_at(self, iter: usize) -> Strategy {
        match self {
            Strategy::Hybrid => [Strategy::D, Strategy::R, Strategy::E][(iter - 1) % 3],
            s => s,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown strategy {s:?}; expected d, r, e, hybrid or random")))
    }
}

/// Residual threshold of the sparse solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Tolerance {
    Absolute(f64),
    /// Multiplied by `‖y‖₂`.
    Relative(f64),
}

impl Tolerance {
    pub fn resolve(self, y_norm: f64) -> f64 {
        match self {
            Tolerance::Absolute(v) => v,
            Tolerance::Relative(v) => v * y_norm,
        }
    }

    fn value(self) -> f64 {
        match self {
            Tolerance::Absolute(v) | Tolerance::Relative(v) => v,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Relative(1e-6)
    }
}

/// Settings of the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub initial: usize,
    pub max_samples: usize,
    pub strategy: Strategy,
    /// `None` uses `⌊m/3⌋` for the current sample count `m`.
    pub sparsity: Option<usize>,
    pub epsilon: Tolerance,
    /// Stop once the relative training error reaches this value.
    pub training_tolerance: f64,
    /// Full CoSaMP every this many iterations; fixed-support updates in
    /// between.
    pub support_refresh: usize,
    /// Stop when the relative coefficient change falls to this value on a
    /// fixed-support step; 0 disables the rule.
    pub coefficient_tolerance: f64,
    /// `None` uses `⌈√m⌉`.
    pub k_clusters: Option<usize>,
    pub residual_mode: ResidualMode,
    pub cosamp_max_iter: usize,
    pub seed: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            initial: 40,
            max_samples: 120,
            strategy: Strategy::Hybrid,
            sparsity: None,
            epsilon: Tolerance::default(),
            training_tolerance: 1e-8,
            support_refresh: 10,
            coefficient_tolerance: 1e-8,
            k_clusters: None,
            residual_mode: ResidualMode::SignedMean,
            cosamp_max_iter: 100,
            seed: 0,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        let fail = |m: String| Err(Error::Usage(m));
        if self.initial == 0 {
            return fail("initial sample count must be positive".into());
        }
        if self.max_samples < self.initial {
            return fail(format!(
                "max_samples {} is below the initial count {}",
                self.max_samples, self.initial
            ));
        }
        if pool_size <= self.initial {
            return fail(format!(
                "pool size {pool_size} must exceed the initial count {}",
                self.initial
            ));
        }
        if self.sparsity == Some(0) {
            return fail("sparsity must be positive".into());
        }
        if !(self.epsilon.value() >= 0.0) || !(self.training_tolerance >= 0.0) || !(self.coefficient_tolerance >= 0.0) {
            return fail("tolerances must be non-negative".into());
        }
        if self.support_refresh == 0 || self.cosamp_max_iter == 0 {
            return fail("support_refresh and cosamp_max_iter must be positive".into());
        }
        if self.k_clusters == Some(0) {
            return fail("k_clusters must be positive".into());
        }
        Ok(())
    }
}

/// Simulation oracle, called one point at a time.
pub trait Oracle {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64>;

    /// Evaluates several points; the default calls [`Oracle::evaluate`] in
    /// order. Implementations that hand points to an external process can
    /// override this to request them together.
    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.iter().map(|p| self.evaluate(p)).collect()
    }
}

impl<F: FnMut(&[f64]) -> Result<f64>> Oracle for F {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64> {
        self(point)
    }
}

/// One solve of the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub m: usize,
    /// Rule used to pick the next sample; `None` on the final iteration.
    pub strategy: Option<Strategy>,
    pub chosen_index: Option<usize>,
    pub training_error: f64,
    pub support_size: usize,
}

pub const HISTORY_CSV_HEADER: &str = "iter,m,strategy,chosen_index,training_error,support_size";

/// CSV rows with 17 significant digits.
pub fn history_to_csv(history: &[HistoryEntry]) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{:.16e},{}\n",
            h.iter,
            h.m,
            h.strategy.map_or("", Strategy::as_str),
            h.chosen_index.map_or(String::new(), |i| i.to_string()),
            h.training_error,
            h.support_size
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "kebab-case")]
pub enum StopReason {
    TrainingTolerance,
    Budget,
    CoefficientsStable,
    PoolExhausted,
    OracleFailed(String),
}

/// Result of [`run_adaptive`].
#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub coefficients: DVector<f64>,
    pub support: Vec<usize>,
    pub selected: Vec<usize>,
    pub responses: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    pub stop: StopReason,
    /// Sparsity of the last full solve.
    pub sparsity: usize,
    /// Absolute residual threshold of the last full solve.
    pub epsilon: f64,
}

impl AdaptiveRun {
    pub fn training_error(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.training_error)
    }
}

/// `‖Φc − y‖₂ / ‖y‖₂`, or `‖Φc‖₂` when `y = 0`.
fn relative_residual(residual: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let yn = y.norm();
    if yn > 0.0 {
        residual.norm() / yn
    } else {
        residual.norm()
    }
}

/// The adaptive sparse solver. Picks `config.initial` rows by RRQR, then
/// repeats: solve, record, check stopping, pick one more row, simulate it.
/// Oracle failures end the run with the history so far.
pub fn run_adaptive(pool: &CandidatePool, config: &AdaptiveConfig, oracle: &mut dyn Oracle) -> Result<AdaptiveRun> {
    config.validate(pool.len())?;
    let n = pool.phi.ncols();
    let selected = rrqr_init(pool, config.initial)?;
    let mut responses: Vec<f64>;
    let mut run = AdaptiveRun {
        coefficients: DVector::zeros(n),
        support: Vec::new(),
        selected: selected.clone(),
        responses: Vec::new(),
        history: Vec::new(),
        stop: StopReason::Budget,
        sparsity: 0,
        epsilon: 0.0,
    };
    let initial_points: Vec<Vec<f64>> = selected.iter().map(|&i| pool.point(i)).collect();
    match oracle.evaluate_batch(&initial_points) {
        Ok(v) if v.len() == selected.len() => responses = v,
        Ok(v) => {
            return Err(Error::Oracle(format!(
                "oracle returned {} values for {} points",
                v.len(),
                selected.len()
            )))
        }
        Err(e) => {
            run.selected.clear();
            run.stop = StopReason::OracleFailed(e.to_string());
            return Ok(run);
        }
    }
    let mut random = stream_rng(config.seed, 0x7261);
    let mut state: Option<AcquisitionState> = None;
    let mut previous: Option<DVector<f64>> = None;
    let mut iter = 0;
    loop {
        iter += 1;
        let sel: Vec<usize> = state
            .as_ref()
            .map_or_else(|| selected.clone(), |s| s.selected().to_vec());
        let m = sel.len();
        let y = DVector::from_column_slice(&responses);
        let phi_sel = pool.phi.select_rows(&sel);
        let full = state.is_none() || (iter - 1) % config.support_refresh == 0;
        let coefficients = if full {
            let s = config.sparsity.unwrap_or(m / 3).clamp(1, m.min(n));
            let eps = config.epsilon.resolve(y.norm());
            let problem = RegressionProblem::new(phi_sel.clone(), y.clone(), s, eps)?;
            let sol = cosamp(&problem, config.cosamp_max_iter)?;
            run.sparsity = s;
            run.epsilon = eps;
            state = Some(AcquisitionState::new(pool, sel.clone(), sol.support)?);
            sol.coefficients
        } else {
            state
                .as_ref()
                .ok_or_else(|| Error::Internal("missing acquisition state".into()))?
                .support_coefficients(pool, &responses)
        };
        let st = state
            .as_mut()
            .ok_or_else(|| Error::Internal("missing acquisition state".into()))?;
        let residual = &phi_sel * &coefficients - &y;
        let training_error = relative_residual(&residual, &y);
        run.history.push(HistoryEntry {
            iter,
            m,
            strategy: None,
            chosen_index: None,
            training_error,
            support_size: st.support().len(),
        });
        let stable = !full
            && config.coefficient_tolerance > 0.0
            && previous
                .as_ref()
                .is_some_and(|p| (&coefficients - p).norm() <= config.coefficient_tolerance * coefficients.norm());
        run.coefficients = coefficients.clone();
        run.support = st.support().to_vec();
        run.selected = st.selected().to_vec();
        run.responses = responses.clone();
        previous = Some(coefficients);

        if training_error <= config.training_tolerance {
            run.stop = StopReason::TrainingTolerance;
            break;
        }
        if m >= config.max_samples {
            run.stop = StopReason::Budget;
            break;
        }
        if stable {
            run.stop = StopReason::CoefficientsStable;
            break;
        }
        let rule = config.strategy.rule_at(iter);
        let next = match rule {
            Strategy::D => d_optimal_next(st, pool),
            Strategy::R => r_optimal_next(st, pool),
            Strategy::E => {
                let k = config
                    .k_clusters
                    .unwrap_or_else(|| (m as f64).sqrt().ceil() as usize)
                    .min(m);
                e_optimal_next(
                    st,
                    pool,
                    residual.as_slice(),
                    k,
                    config.residual_mode,
                    config.seed.wrapping_add(iter as u64),
                )?
            }
            Strategy::Random | Strategy::Hybrid => {
                let free: Vec<usize> = st.unselected().collect();
                (!free.is_empty()).then(|| free[random.random_range(0..free.len())])
            }
        };
        let Some(next) = next else {
            run.stop = StopReason::PoolExhausted;
            break;
        };
        if let Some(h) = run.history.last_mut() {
            h.strategy = Some(rule);
            h.chosen_index = Some(next);
        }
        match oracle.evaluate(&pool.point(next)) {
            Ok(v) => responses.push(v),
            Err(e) => {
                run.stop = StopReason::OracleFailed(e.to_string());
                break;
            }
        }
        st.add(pool, next)?;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed);
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    fn pool_from_phi(phi: DMatrix<f64>) -> CandidatePool {
        let pts = phi.clone();
        CandidatePool::new(pts, phi).unwrap()
    }

    fn det(m: &DMatrix<f64>) -> f64 {
        m.clone().determinant()
    }

    #[test]
    fn rrqr_on_identity_picks_distinct_rows() {
        let pool = pool_from_phi(DMatrix::identity(5, 5));
        let pick = rrqr_init(&pool, 3).unwrap();
        let mut p = pick.clone();
        p.sort_unstable();
        p.dedup();
        assert_eq!(p.len(), 3);
        let a = pool.phi().select_rows(&pick);
        assert!((det(&(&a * a.transpose())) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rrqr_skips_duplicate_rows() {
        let mut phi = gaussian(6, 3, 1);
        let r0 = phi.row(0).clone_owned();
        phi.set_row(1, &r0);
        phi.set_row(2, &r0);
        let pick = rrqr_init(&pool_from_phi(phi), 3).unwrap();
        assert!(pick.iter().filter(|&&i| i < 3).count() <= 1);
        let mut p = pick.clone();
        p.dedup();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn rrqr_rank_error() {
        let mut phi = DMatrix::zeros(5, 3);
        phi[(0, 0)] = 1.0;
        phi[(1, 0)] = 2.0;
        assert!(matches!(rrqr_init(&pool_from_phi(phi), 2), Err(Error::Numerical(_))));
    }

    #[test]
    fn d_optimal_prefers_larger_leverage() {
        let mut phi = DMatrix::zeros(4, 2);
        phi[(0, 0)] = 1.0;
        phi[(1, 1)] = 1.0;
        phi[(2, 0)] = 1.0;
        phi[(3, 0)] = 2.0;
        let pool = pool_from_phi(phi);
        let st = AcquisitionState::new(&pool, vec![0, 1], vec![0, 1]).unwrap();
        assert_eq!(d_optimal_next(&st, &pool), Some(3));
    }

    #[test]
    fn d_optimal_matches_determinant_oracle_and_updates_inverse() {
        let phi = gaussian(40, 6, 3);
        let pool = pool_from_phi(phi.clone());
        let support = vec![0, 2, 3, 5];
        let mut st = AcquisitionState::new(&pool, (0..8).collect(), support.clone()).unwrap();
        let pick = d_optimal_next(&st, &pool).unwrap();
        let best = (8..40)
            .max_by(|&a, &b| {
                let da = {
                    let x = phi.row(a).select_columns(&support).transpose();
                    det(&(st.gram() + &x * x.transpose()))
                };
                let db = {
                    let x = phi.row(b).select_columns(&support).transpose();
                    det(&(st.gram() + &x * x.transpose()))
                };
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        assert_eq!(pick, best);
        let before = det(st.gram());
        st.add(&pool, pick).unwrap();
        assert!(det(st.gram()) > before);
        let fresh = st.gram().clone().try_inverse().unwrap();
        assert!(linalg::relative_frobenius(st.gram_inverse(), &fresh) < 1e-8);
    }

    #[test]
    fn inverse_reverified_periodically() {
        let pool = pool_from_phi(gaussian(60, 5, 4));
        let mut st = AcquisitionState::new(&pool, (0..6).collect(), vec![0, 1, 2, 3, 4]).unwrap();
        for i in 6..(6 + INVERSE_CHECK_PERIOD) {
            st.add(&pool, i).unwrap();
        }
        assert!(st.last_check_deviation() < 1e-8);
        assert!(st.add(&pool, 6).is_err());
    }

    #[test]
    fn rank_one_extremes_match_eigensolver() {
        for seed in 0..20 {
            let g = gaussian(7, 5, seed);
            let gram = g.tr_mul(&g);
            let x = gaussian(5, 1, seed + 100).column(0).clone_owned();
            let pool = pool_from_phi(g);
            let st = AcquisitionState::new(&pool, (0..7).collect(), (0..5).collect()).unwrap();
            let obj = RipObjective::new(&st);
            let direct = {
                let b = (&gram + &x * x.transpose()) / 8.0 - DMatrix::identity(5, 5);
                let (lo, hi) = linalg::symmetric_eig_extremes(&b);
                lo.abs().max(hi.abs())
            };
            assert!((obj.value(&x) - direct).abs() < 1e-10 * direct.max(1.0), "seed {seed}");
        }
    }

    #[test]
    fn rank_one_extremes_with_deflation() {
        let (lo, hi) = rank_one_extremes(&[1.0, 1.0, 3.0], &[0.0, 0.0, 2.0]);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 7.0).abs() < 1e-12);
        let (lo, hi) = rank_one_extremes(&[2.0], &[0.0]);
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn r_optimal_scalar_case() {
        let col = [1.0, 0.5, 0.2, 2.0, 1.1, 0.0];
        let phi = DMatrix::from_column_slice(6, 1, &col);
        let pool = pool_from_phi(phi);
        let st = AcquisitionState::new(&pool, vec![0, 1], vec![0]).unwrap();
        let sum = 1.0 + 0.25;
        let oracle = (2..6)
            .min_by(|&a, &b| {
                let f = |i: usize| ((sum + col[i] * col[i]) / 3.0 - 1.0_f64).abs();
                f(a).total_cmp(&f(b)).then(a.cmp(&b))
            })
            .unwrap();
        assert_eq!(r_optimal_next(&st, &pool), Some(oracle));
    }

    #[test]
    fn e_optimal_targets_bad_cluster() {
        let mut pts = DMatrix::zeros(12, 1);
        for i in 0..4 {
            pts[(i, 0)] = -10.0 + i as f64 * 0.1;
            pts[(i + 4, 0)] = 10.0 + i as f64 * 0.1;
        }
        for (k, v) in [-9.0, 9.5, 0.0, 11.0].into_iter().enumerate() {
            pts[(8 + k, 0)] = v;
        }
        let phi = DMatrix::from_element(12, 1, 1.0);
        let pool = CandidatePool::new(pts, phi).unwrap();
        let st = AcquisitionState::new(&pool, (0..8).collect(), vec![0]).unwrap();
        let res = [0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0, 1.5];
        let pick = e_optimal_next(&st, &pool, &res, 2, ResidualMode::SignedMean, 7).unwrap();
        assert_eq!(pick, Some(8 + 1));
        let pick1 = e_optimal_next(&st, &pool, &res, 1, ResidualMode::SignedMean, 7).unwrap();
        assert_eq!(pick1, Some(8 + 2));
    }

    #[test]
    fn kmeans_recovers_separated_groups() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i / 10) as f64 * 100.0 + (i % 10) as f64 * 0.01])
            .collect();
        let (_, assign) = kmeans(&pts, 3, 2).unwrap();
        for g in 0..3 {
            let a = assign[g * 10];
            assert!(assign[g * 10..g * 10 + 10].iter().all(|&x| x == a));
        }
        let (_, assign) = kmeans(&vec![vec![0.0]; 4], 3, 1).unwrap();
        let mut used: Vec<usize> = assign.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 3);
    }

    #[test]
    fn strategy_parsing_and_rotation() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("x".parse::<Strategy>().is_err());
        let rot: Vec<_> = (1..=4).map(|i| Strategy::Hybrid.rule_at(i)).collect();
        assert_eq!(rot, vec![Strategy::D, Strategy::R, Strategy::E, Strategy::D]);
    }

    fn planted_pool(seed: u64) -> (CandidatePool, DVector<f64>) {
        let phi = gaussian(300, 30, seed);
        let mut c = DVector::zeros(30);
        for (j, v) in [(0, 1.0), (4, -0.5), (11, 0.3), (20, 0.8), (29, -0.2)] {
            c[j] = v;
        }
        (pool_from_phi(phi), c)
    }

    #[test]
    fn adaptive_reaches_tolerance_and_stops() {
        let (pool, c) = planted_pool(5);
        for strategy in Strategy::ALL {
            let cfg = AdaptiveConfig {
                initial: 15,
                max_samples: 60,
                strategy,
                training_tolerance: 1e-8,
                ..AdaptiveConfig::default()
            };
            let mut calls = 0usize;
            let phi = pool.phi().clone();
            let points = pool.points().clone();
            let mut oracle = |x: &[f64]| -> Result<f64> {
                calls += 1;
                let i = (0..points.nrows())
                    .find(|&i| points.row(i).iter().eq(x.iter()))
                    .unwrap();
                Ok(phi.row(i).dot(&c.transpose()))
            };
            let run = run_adaptive(&pool, &cfg, &mut oracle).unwrap();
            assert_eq!(run.stop, StopReason::TrainingTolerance, "{strategy}");
            assert!(run.training_error() <= 1e-8);
            assert_eq!(calls, run.history.last().unwrap().m);
            assert_eq!(run.history.len(), run.history.last().unwrap().m - 15 + 1);
            assert!(run.history.last().unwrap().chosen_index.is_none());
            let mut s = run.selected.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), run.selected.len());
        }
    }

    #[test]
    fn adaptive_preserves_history_on_oracle_failure() {
        let (pool, _) = planted_pool(6);
        let cfg = AdaptiveConfig {
            initial: 10,
            max_samples: 40,
            strategy: Strategy::D,
            coefficient_tolerance: 0.0,
            ..AdaptiveConfig::default()
        };
        let mut calls = 0;
        let mut oracle = |x: &[f64]| -> Result<f64> {
            calls += 1;
            if calls > 13 {
                Err(Error::Oracle("simulator down".into()))
            } else {
                Ok(x[0].sin())
            }
        };
        let run = run_adaptive(&pool, &cfg, &mut oracle).unwrap();
        assert!(matches!(run.stop, StopReason::OracleFailed(_)));
        assert_eq!(run.history.len(), 4);
        assert_eq!(run.responses.len(), 13);
    }

    #[test]
    fn config_validation() {
        let ok = AdaptiveConfig::default();
        assert!(ok.validate(1000).is_ok());
        assert!(ok.validate(40).is_err());
        assert!(AdaptiveConfig {
            max_samples: 5,
            ..ok.clone()
        }
        .validate(1000)
        .is_err());
        assert!(AdaptiveConfig {
            support_refresh: 0,
            ..ok
        }
        .validate(1000)
        .is_err());
    }

    #[test]
    fn history_csv_format() {
        let h = vec![
            HistoryEntry {
                iter: 1,
                m: 10,
                strategy: Some(Strategy::D),
                chosen_index: Some(4),
                training_error: 0.5,
                support_size: 3,
            },
            HistoryEntry {
                iter: 2,
                m: 11,
                strategy: None,
                chosen_index: None,
                training_error: 0.25,
                support_size: 3,
            },
        ];
        assert_eq!(
            history_to_csv(&h),
            "iter,m,strategy,chosen_index,training_error,support_size\n\
             1,10,d,4,5.0000000000000000e-1,3\n2,11,,,2.5000000000000000e-1,3\n"
        );
    }
}
