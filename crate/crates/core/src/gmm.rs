//! Input distributions: Gaussian mixtures, independent univariate marginals
//! and block-structured combinations of both.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Generator used for every random draw in the crate. ChaCha8 is portable,
/// so a seed reproduces the same stream on every platform.
pub type Rng64 = ChaCha8Rng;

/// Deterministic generator for `seed`.
///
/// Independent streams derived from one user seed use `stream_rng(seed, k)`,
/// which selects ChaCha stream `k` for the same key.
pub fn seeded_rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Smallest admissible Cholesky pivot, relative to the largest diagonal
/// entry of the covariance.
const PIVOT_FLOOR: f64 = 1e-12;

/// One multivariate normal `N(μ, Σ)` with its lower Cholesky factor `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    log_det: f64,
}

impl GaussianComponent {
    /// Validates `covariance` (square, symmetric, positive definite with a
    /// healthy smallest pivot) and factors it once.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Validation("component dimension must be positive".into()));
        }
        if covariance.shape() != (d, d) {
            return Err(Error::Validation(format!(
                "covariance is {}x{}, expected {d}x{d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite mean or covariance entry".into()));
        }
        let scale = covariance.amax();
        for i in 0..d {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Validation(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        let max_diag = (0..d).map(|i| covariance[(i, i)]).fold(0.0, f64::max);
        let chol = linalg::cholesky(&covariance)
            .ok_or_else(|| Error::Validation("covariance is not positive definite".into()))?;
        if chol.min_pivot() < PIVOT_FLOOR * max_diag {
            return Err(Error::Validation(format!(
                "covariance is near-singular: smallest pivot {:.3e} below {:.0e} x max diagonal",
                chol.min_pivot(),
                PIVOT_FLOOR
            )));
        }
        let log_det = chol.pivots.iter().map(|p| p.ln()).sum();
        Ok(Self {
            mean,
            covariance,
            factor: chol.l,
            log_det,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `(A, μ)` such that `ξ = A η + μ` with `η ~ N(0, I)` has this law.
    pub fn whiten(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.factor, &self.mean)
    }

    pub fn log_density(&self, point: &[f64]) -> f64 {
        let mut z: Vec<f64> = point.iter().zip(self.mean.iter()).map(|(x, m)| x - m).collect();
        linalg::forward_substitute(&self.factor, &mut z);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * (quad + self.log_det + self.dimension() as f64 * LN_2PI)
    }

    fn draw_into<R: Rng>(&self, rng: &mut R, eta: &mut [f64], out: &mut [f64]) {
        for e in eta.iter_mut() {
            *e = StandardNormal.sample(rng);
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut v = self.mean[i];
            for (k, e) in eta.iter().enumerate().take(i + 1) {
                v += self.factor[(i, k)] * e;
            }
            *o = v;
        }
    }
}

/// Weighted sum of Gaussian components sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    /// Builds a mixture; weights must be positive and sum to one within 1e-12.
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation("mixture needs at least one component".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Validation("mixture weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("mixture weights sum to {total}, not 1")));
        }
        let d = components[0].dimension();
        if components.iter().any(|c| c.dimension() != d) {
            return Err(Error::Validation("mixture components differ in dimension".into()));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            weights,
            components,
            cumulative,
        })
    }

    /// Single-component convenience constructor.
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![1.0], vec![GaussianComponent::new(mean, covariance)?])
    }

    /// `N(0, I_d)`.
    pub fn standard_normal(d: usize) -> Result<Self> {
        Self::gaussian(DVector::zeros(d), DMatrix::identity(d, d))
    }

    pub fn dimension(&self) -> usize {
        self.components[0].dimension()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// `Σᵢ wᵢ N(point | μᵢ, Σᵢ)`.
    pub fn density(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension() {
            return Err(Error::Usage(format!(
                "point has length {}, mixture dimension is {}",
                point.len(),
                self.dimension()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.log_density(point).exp())
            .sum())
    }

    /// Index of the component selected by a uniform draw `u ∈ [0, 1)`.
    fn select(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.components.len() - 1)
    }

    fn draw_row<R: Rng>(&self, rng: &mut R, eta: &mut [f64], out: &mut [f64]) -> usize {
        let u: f64 = rng.random();
        let which = self.select(u);
        self.components[which].draw_into(rng, eta, out);
        which
    }

    /// `count` i.i.d. draws as rows; identical for identical seeds.
    pub fn sample(&self, count: usize, seed: u64) -> Result<DMatrix<f64>> {
        Ok(self.sample_labeled(count, seed)?.0)
    }

    /// Like [`sample`](Self::sample), also returning each row's component.
    pub fn sample_labeled(&self, count: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
        if count == 0 {
            return Err(Error::Usage("sample count must be at least 1".into()));
        }
        let d = self.dimension();
        let mut rng = seeded_rng(seed);
        let mut out = DMatrix::zeros(count, d);
        let mut labels = Vec::with_capacity(count);
        let mut eta = vec![0.0; d];
        let mut row = vec![0.0; d];
        for r in 0..count {
            labels.push(self.draw_row(&mut rng, &mut eta, &mut row));
            for (j, v) in row.iter().enumerate() {
                out[(r, j)] = *v;
            }
        }
        Ok((out, labels))
    }

    /// Mixture mean `Σᵢ wᵢ μᵢ`.
    pub fn mean(&self) -> DVector<f64> {
        self.weights
            .iter()
            .zip(&self.components)
            .fold(DVector::zeros(self.dimension()), |acc, (w, c)| acc + c.mean() * *w)
    }

    /// Mixture covariance `Σᵢ wᵢ(Σᵢ + μᵢμᵢᵀ) − μ̄μ̄ᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let mbar = self.mean();
        let second = self
            .weights
            .iter()
            .zip(&self.components)
            .fold(DMatrix::zeros(d, d), |acc, (w, c)| {
                acc + (c.covariance() + c.mean() * c.mean().transpose()) * *w
            });
        second - &mbar * mbar.transpose()
    }
}

/// Named one-dimensional densities for independent coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Univariate {
    Gaussian { mean: f64, std: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl Univariate {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Univariate::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            Univariate::Gamma { shape, scale } => shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid univariate parameters {self:?}")))
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Univariate::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            Univariate::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = x / scale;
                ((shape - 1.0) * z.ln() - z - ln_gamma(shape)).exp() / scale
            }
        }
    }

    /// `E[x^k]`.
    pub fn raw_moment(&self, k: u32) -> f64 {
        match *self {
            Univariate::Gaussian { mean, std } => {
                // E[(μ + σz)^k] = Σ_j C(k, j) μ^{k−j} σ^j E[z^j]
                let mut total = 0.0;
                let mut binom = 1.0;
                for j in 0..=k {
                    if j > 0 {
                        binom = binom * (k - j + 1) as f64 / j as f64;
                    }
                    total += binom * mean.powi((k - j) as i32) * std.powi(j as i32) * gaussian_moment(j);
                }
                total
            }
            Univariate::Gamma { shape, scale } => (0..k).fold(1.0, |acc, j| acc * (shape + j as f64) * scale),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Univariate::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Univariate::Gamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }
}

/// `E[z^k]` for `z ~ N(0, 1)`: zero for odd `k`, `(k − 1)!!` otherwise.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0;
    let mut j = k as i64 - 1;
    while j > 1 {
        v *= j as f64;
        j -= 2;
    }
    v
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Law of one block of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupLaw {
    Mixture(GaussianMixture),
    Univariate(Univariate),
}

/// A block of coordinates, independent of every other block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGroup {
    pub indices: Vec<usize>,
    pub law: GroupLaw,
}

/// Partition of `{0, …, d−1}` into independent blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGroups {
    dimension: usize,
    groups: Vec<ParameterGroup>,
}

impl ParameterGroups {
    pub fn new(dimension: usize, groups: Vec<ParameterGroup>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        let mut seen = vec![false; dimension];
        for g in &groups {
            if g.indices.is_empty() {
                return Err(Error::Validation("empty parameter group".into()));
            }
            let width = match &g.law {
                GroupLaw::Mixture(m) => m.dimension(),
                GroupLaw::Univariate(u) => {
                    u.validate()?;
                    1
                }
            };
            if width != g.indices.len() {
                return Err(Error::Validation(format!(
                    "group over {} indices carries a {width}-dimensional law",
                    g.indices.len()
                )));
            }
            for &i in &g.indices {
                if i >= dimension {
                    return Err(Error::Validation(format!("index {i} out of range 0..{dimension}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Validation(format!("index {i} appears in two groups")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("index {i} is not covered by any group")));
        }
        Ok(Self { dimension, groups })
    }

    /// One mixture block over all coordinates in natural order.
    pub fn single(mixture: GaussianMixture) -> Self {
        let d = mixture.dimension();
        Self {
            dimension: d,
            groups: vec![ParameterGroup {
                indices: (0..d).collect(),
                law: GroupLaw::Mixture(mixture),
            }],
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn groups(&self) -> &[ParameterGroup] {
        &self.groups
    }

    /// The mixture when the whole vector is one mixture block in natural
    /// coordinate order.
    pub fn as_single_mixture(&self) -> Option<&GaussianMixture> {
        match self.groups.as_slice() {
            [ParameterGroup {
                indices,
                law: GroupLaw::Mixture(m),
            }] if indices.iter().enumerate().all(|(k, &i)| k == i) => Some(m),
            _ => None,
        }
    }

    /// Joint density (product over blocks).
    pub fn density(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension {
            return Err(Error::Usage(format!(
                "point has length {}, expected {}",
                point.len(),
                self.dimension
            )));
        }
        let mut total = 1.0;
        for g in &self.groups {
            let sub: Vec<f64> = g.indices.iter().map(|&i| point[i]).collect();
            total *= match &g.law {
                GroupLaw::Mixture(m) => m.density(&sub)?,
                GroupLaw::Univariate(u) => u.density(sub[0]),
            };
        }
        Ok(total)
    }

    /// `count` i.i.d. joint draws, blocks drawn in declaration order.
    pub fn sample(&self, count: usize, seed: u64) -> Result<DMatrix<f64>> {
        if count == 0 {
            return Err(Error::Usage("sample count must be at least 1".into()));
        }
        if let Some(m) = self.as_single_mixture() {
            return m.sample(count, seed);
        }
        let mut rng = seeded_rng(seed);
        let mut out = DMatrix::zeros(count, self.dimension);
        let width = self.groups.iter().map(|g| g.indices.len()).max().unwrap_or(1);
        let mut eta = vec![0.0; width];
        let mut row = vec![0.0; width];
        for r in 0..count {
            for g in &self.groups {
                match &g.law {
                    GroupLaw::Mixture(m) => {
                        let w = m.dimension();
                        m.draw_row(&mut rng, &mut eta[..w], &mut row[..w]);
                        for (k, &i) in g.indices.iter().enumerate() {
                            out[(r, i)] = row[k];
                        }
                    }
                    GroupLaw::Univariate(u) => out[(r, g.indices[0])] = u.draw(&mut rng),
                }
            }
        }
        Ok(out)
    }
}

/// Mixture specification file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dimension: usize,
    pub groups: Vec<GroupSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub indices: Vec<usize>,
    #[serde(flatten)]
    pub kind: GroupKindSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupKindSpec {
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        /// One row-major `k×k` matrix per component.
        covariances: Vec<Vec<Vec<f64>>>,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
}

/// Tolerance on the weight sum accepted when loading a specification file.
pub const SPEC_WEIGHT_TOLERANCE: f64 = 1e-9;

impl MixtureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validates and builds the distribution. Mixture weights within 1e-9
    /// of summing to one are renormalized; anything further off is an error.
    pub fn build(&self) -> Result<ParameterGroups> {
        let mut groups = Vec::with_capacity(self.groups.len());
        for (gi, g) in self.groups.iter().enumerate() {
            let law = match &g.kind {
                GroupKindSpec::Mixture {
                    weights,
                    means,
                    covariances,
                } => {
                    let total: f64 = weights.iter().sum();
                    if (total - 1.0).abs() > SPEC_WEIGHT_TOLERANCE {
                        return Err(Error::Validation(format!("group {gi}: weights sum to {total}, not 1")));
                    }
                    if means.len() != weights.len() || covariances.len() != weights.len() {
                        return Err(Error::Validation(format!(
                            "group {gi}: {} weights, {} means, {} covariances",
                            weights.len(),
                            means.len(),
                            covariances.len()
                        )));
                    }
                    let k = g.indices.len();
                    let mut comps = Vec::with_capacity(weights.len());
                    for (mean, cov) in means.iter().zip(covariances) {
                        if mean.len() != k || cov.len() != k || cov.iter().any(|r| r.len() != k) {
                            return Err(Error::Validation(format!(
                                "group {gi}: component shapes do not match {k} indices"
                            )));
                        }
                        let flat: Vec<f64> = cov.iter().flatten().copied().collect();
                        comps.push(GaussianComponent::new(
                            DVector::from_vec(mean.clone()),
                            DMatrix::from_row_slice(k, k, &flat),
                        )?);
                    }
                    let w: Vec<f64> = weights.iter().map(|w| w / total).collect();
                    GroupLaw::Mixture(GaussianMixture::new(w, comps)?)
                }
                GroupKindSpec::Gaussian { mean, std } => {
                    GroupLaw::Univariate(Univariate::Gaussian { mean: *mean, std: *std })
                }
                GroupKindSpec::Gamma { shape, scale } => GroupLaw::Univariate(Univariate::Gamma {
                    shape: *shape,
                    scale: *scale,
                }),
            };
            groups.push(ParameterGroup {
                indices: g.indices.clone(),
                law,
            });
        }
        ParameterGroups::new(self.dimension, groups)
    }

    /// Specification describing a single mixture over all coordinates.
    pub fn from_mixture(mix: &GaussianMixture) -> Self {
        let d = mix.dimension();
        Self {
            dimension: d,
            groups: vec![GroupSpec {
                indices: (0..d).collect(),
                kind: GroupKindSpec::Mixture {
                    weights: mix.weights().to_vec(),
                    means: mix
                        .components()
                        .iter()
                        .map(|c| c.mean().iter().copied().collect())
                        .collect(),
                    covariances: mix
                        .components()
                        .iter()
                        .map(|c| {
                            (0..d)
                                .map(|i| (0..d).map(|j| c.covariance()[(i, j)]).collect())
                                .collect()
                        })
                        .collect(),
                },
            }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(mean: &[f64], cov: &[f64]) -> GaussianComponent {
        let d = mean.len();
        GaussianComponent::new(DVector::from_row_slice(mean), DMatrix::from_row_slice(d, d, cov)).unwrap()
    }

    #[test]
    fn standard_normal_peak() {
        let m = GaussianMixture::standard_normal(1).unwrap();
        let v = m.density(&[0.0]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.39894).abs() < 1e-5);
    }

    #[test]
    fn symmetric_pair_is_even() {
        let m = GaussianMixture::new(vec![0.5, 0.5], vec![comp(&[1.0], &[1.0]), comp(&[-1.0], &[1.0])]).unwrap();
        for x in [0.3, 1.7, 4.0] {
            let a = m.density(&[x]).unwrap();
            let b = m.density(&[-x]).unwrap();
            assert!((a - b).abs() <= 1e-16 * a.max(1.0));
        }
    }

    #[test]
    fn three_component_density_matches_hand_evaluation() {
        // Components with 2x2 covariances; each density evaluated from the
        // closed-form bivariate normal with correlation ρ.
        let params = [
            (0.2, [0.0, 0.0], [1.0, 0.3, 0.3, 2.0]),
            (0.5, [1.0, -1.0], [0.5, -0.1, -0.1, 0.4]),
            (0.3, [-2.0, 0.5], [2.0, 0.0, 0.0, 0.25]),
        ];
        let m = GaussianMixture::new(
            params.iter().map(|p| p.0).collect(),
            params.iter().map(|p| comp(&p.1, &p.2)).collect(),
        )
        .unwrap();
        let x = [0.4, -0.7];
        let mut expected = 0.0;
        for (w, mu, c) in params {
            let (s1, s2) = (c[0].sqrt(), c[3].sqrt());
            let rho = c[1] / (s1 * s2);
            let z1 = (x[0] - mu[0]) / s1;
            let z2 = (x[1] - mu[1]) / s2;
            let q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (1.0 - rho * rho);
            expected += w * (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * s1 * s2 * (1.0 - rho * rho).sqrt());
        }
        let got = m.density(&x).unwrap();
        assert!((got - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn density_dimension_mismatch_is_usage_error() {
        let m = GaussianMixture::standard_normal(2).unwrap();
        assert!(matches!(m.density(&[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn whiten_identity_and_diagonal() {
        let c = comp(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(c.whiten().0, &DMatrix::identity(2, 2));
        let c = comp(&[1.0, 2.0], &[4.0, 0.0, 0.0, 9.0]);
        let (a, mu) = c.whiten();
        assert_eq!(a, &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        assert_eq!(mu.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn whiten_reconstructs_random_spd() {
        let mut rng = seeded_rng(11);
        for d in 1..7 {
            let b = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
            let sigma = &b * b.transpose() + DMatrix::identity(d, d) * 0.1;
            let c = GaussianComponent::new(DVector::zeros(d), sigma.clone()).unwrap();
            let (a, _) = c.whiten();
            assert!((a * a.transpose() - &sigma).norm() <= 1e-10 * sigma.norm());
        }
    }

    #[test]
    fn rejects_non_spd_and_near_singular() {
        let bad = GaussianComponent::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(bad, Err(Error::Validation(_))));
        let near = GaussianComponent::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0 - 1e-14, 1.0 - 1e-14, 1.0]),
        );
        assert!(matches!(near, Err(Error::Validation(_))));
        let asym = GaussianComponent::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]));
        assert!(matches!(asym, Err(Error::Validation(_))));
    }

    #[test]
    fn weights_must_be_positive_and_normalized() {
        let c = || comp(&[0.0], &[1.0]);
        assert!(GaussianMixture::new(vec![0.5, 0.4], vec![c(), c()]).is_err());
        assert!(GaussianMixture::new(vec![1.2, -0.2], vec![c(), c()]).is_err());
        assert!(GaussianMixture::new(vec![0.5, 0.5], vec![c(), c()]).is_ok());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = GaussianMixture::new(vec![0.3, 0.7], vec![comp(&[0.0], &[1.0]), comp(&[3.0], &[0.5])]).unwrap();
        assert_eq!(m.sample(50, 9).unwrap(), m.sample(50, 9).unwrap());
        assert_ne!(m.sample(50, 9).unwrap(), m.sample(50, 10).unwrap());
    }

    #[test]
    fn component_fraction_is_binomially_concentrated() {
        let m = GaussianMixture::new(vec![0.3, 0.7], vec![comp(&[-5.0], &[1.0]), comp(&[5.0], &[1.0])]).unwrap();
        let n = 100_000;
        let (_, labels) = m.sample_labeled(n, 4).unwrap();
        let frac = labels.iter().filter(|&&l| l == 0).count() as f64 / n as f64;
        let sd = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sd, "fraction {frac}");
    }

    #[test]
    fn standard_normal_sample_mean() {
        let m = GaussianMixture::standard_normal(3).unwrap();
        let x = m.sample(1_000_000, 5).unwrap();
        for j in 0..3 {
            let mean = x.column(j).mean();
            assert!(mean.abs() < 0.01, "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn empirical_covariance_matches_mixture_covariance() {
        let m = GaussianMixture::new(
            vec![0.4, 0.6],
            vec![
                comp(&[1.0, 0.0], &[1.0, 0.4, 0.4, 0.8]),
                comp(&[-1.0, 2.0], &[0.3, -0.1, -0.1, 0.6]),
            ],
        )
        .unwrap();
        let n = 100_000;
        let x = m.sample(n, 21).unwrap();
        let mean = m.mean();
        let cov = m.covariance();
        for i in 0..2 {
            for j in 0..2 {
                let prods: Vec<f64> = (0..n).map(|r| (x[(r, i)] - mean[i]) * (x[(r, j)] - mean[j])).collect();
                let avg = prods.iter().sum::<f64>() / n as f64;
                let var = prods.iter().map(|p| (p - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                assert!(
                    (avg - cov[(i, j)]).abs() < 3.0 * se + 1e-12,
                    "entry ({i},{j}): {avg} vs {}",
                    cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let m1 = GaussianMixture::new(vec![0.3, 0.7], vec![comp(&[-1.0], &[0.5]), comp(&[2.0], &[1.5])]).unwrap();
        // [−10σ, 10σ] box around the extreme component means.
        let (lo, hi, cells) = (-1.0 - 10.0 * 1.5f64.sqrt(), 2.0 + 10.0 * 1.5f64.sqrt(), 4000);
        let h = (hi - lo) / cells as f64;
        let total: f64 = (0..cells)
            .map(|k| m1.density(&[lo + (k as f64 + 0.5) * h]).unwrap() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-4, "1-D integral {total}");

        let m2 = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![
                comp(&[0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]),
                comp(&[1.0, -1.0], &[0.4, 0.0, 0.0, 0.9]),
            ],
        )
        .unwrap();
        let (lo, hi, cells) = (-11.0, 11.0, 600);
        let h = (hi - lo) / cells as f64;
        let mut total = 0.0;
        for a in 0..cells {
            for b in 0..cells {
                let p = [lo + (a as f64 + 0.5) * h, lo + (b as f64 + 0.5) * h];
                total += m2.density(&p).unwrap() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "2-D integral {total}");
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn spec_file_round_trip_and_weight_tolerance() {
        let text = r#"{
            "dimension": 4,
            "groups": [
                {"indices": [0, 2], "kind": "mixture", "weights": [0.25, 0.75],
                 "means": [[0, 1], [1, 0]],
                 "covariances": [[[1, 0.2], [0.2, 1]], [[0.5, 0], [0, 0.5]]]},
                {"indices": [1], "kind": "gamma", "shape": 2.0, "scale": 1.5},
                {"indices": [3], "kind": "gaussian", "mean": 0.5, "std": 2.0}
            ]
        }"#;
        let spec = MixtureSpec::from_json(text).unwrap();
        let groups = spec.build().unwrap();
        assert_eq!(groups.groups().len(), 3);
        assert!(groups.as_single_mixture().is_none());
        let x = groups.sample(10, 1).unwrap();
        assert!(x.column(1).iter().all(|v| *v > 0.0));

        let off = text.replace("0.75", "0.7500001");
        assert!(MixtureSpec::from_json(&off).unwrap().build().is_err());
        let close = text.replace("0.75", "0.7500000000001");
        assert!(MixtureSpec::from_json(&close).unwrap().build().is_ok());
    }

    #[test]
    fn groups_must_partition() {
        let u = |i| ParameterGroup {
            indices: vec![i],
            law: GroupLaw::Univariate(Univariate::Gaussian { mean: 0.0, std: 1.0 }),
        };
        assert!(ParameterGroups::new(2, vec![u(0), u(1)]).is_ok());
        assert!(ParameterGroups::new(2, vec![u(0), u(0)]).is_err());
        assert!(ParameterGroups::new(3, vec![u(0), u(1)]).is_err());
    }

    #[test]
    fn univariate_moments() {
        let g = Univariate::Gaussian { mean: 1.0, std: 2.0 };
        assert!((g.raw_moment(2) - 5.0).abs() < 1e-14);
        let gm = Univariate::Gamma { shape: 2.0, scale: 3.0 };
        assert!((gm.raw_moment(2) - 2.0 * 3.0 * 9.0).abs() < 1e-12);
    }
}
