//! Exact moments `E[ξ^α]` of Gaussian mixtures.
//!
//! For one component `ξ = Aη + μ`, each coordinate `ξ_j` is an affine
//! function of independent standard normals and has a rank-2 functional
//! tensor train. Products of coordinates become Kronecker products of the
//! trains, and since the `η_i` are independent the expectation of a train is
//! the chain product of the per-core expectations. Cores are stored as
//! matrix-valued polynomials in their variable so repeated products in the
//! same coordinate stay exact.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gmm::{gaussian_moment, GaussianComponent, GaussianMixture};
use crate::indexing::{split, MultiIndex, MultiIndexSet};

/// Matrix-valued polynomial `G(η) = Σ_k coeffs[k] η^k` of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    coeffs: Vec<DMatrix<f64>>,
}

impl Core {
    fn new(coeffs: Vec<DMatrix<f64>>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    /// Highest power of the core variable with a stored coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn evaluate(&self, eta: f64) -> DMatrix<f64> {
        // Horner in the matrix coefficients.
        let mut acc = self.coeffs[self.degree()].clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * eta + c;
        }
        acc
    }

    /// `E[G(η)]` for `η ~ N(0, 1)`.
    pub fn expectation(&self, gauss: &GaussianMoments) -> DMatrix<f64> {
        let mut acc = self.coeffs[0].clone();
        for (k, c) in self.coeffs.iter().enumerate().skip(2).step_by(2) {
            acc += c * gauss.get(k);
        }
        acc
    }
}

/// `E[η^k]` for `η ~ N(0, 1)`, tabulated once.
#[derive(Debug, Clone)]
pub struct GaussianMoments(Vec<f64>);

impl GaussianMoments {
    pub fn up_to(max_order: usize) -> Self {
        Self((0..=max_order as u32).map(gaussian_moment).collect())
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or_else(|| gaussian_moment(k as u32))
    }
}

/// Chain `G₀ G₁(η₁) ⋯ G_d(η_d)` with a constant head row and one
/// polynomial core per whitened variable; the last core has one column.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTensorTrain {
    head: Vec<f64>,
    cores: Vec<Core>,
}

impl fmt::Display for FunctionalTensorTrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FTT(d = {}, ranks = {:?})", self.dimension(), self.ranks())
    }
}

impl FunctionalTensorTrain {
    /// Train for the constant `value` over `d` variables (all ranks 1).
    pub fn constant(d: usize, value: f64) -> Self {
        Self {
            head: vec![value],
            cores: (0..d).map(|_| Core::new(vec![DMatrix::identity(1, 1)])).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.cores.len()
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    /// `(r₀, …, r_d)` with `r₀` the head width and `r_d = 1`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(self.head.len())
            .chain(self.cores.iter().map(Core::cols))
            .collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Pointwise value at the whitened point `eta`.
    pub fn evaluate(&self, eta: &[f64]) -> Result<f64> {
        if eta.len() != self.dimension() {
            return Err(Error::Usage(format!(
                "train over {} variables evaluated at a point of length {}",
                self.dimension(),
                eta.len()
            )));
        }
        let mut v = DMatrix::from_row_slice(1, self.head.len(), &self.head);
        for (core, &e) in self.cores.iter().zip(eta) {
            v *= core.evaluate(e);
        }
        Ok(v[(0, 0)])
    }
}

/// Rank-2 train of `ξ_j = Σ_k a_jk η_k + μ_j` for one component:
/// head `(μ_j, 1)`, interior cores `[[1, 0], [a_jk η_k, 1]]` and last core
/// `(1, a_jd η_d)ᵀ`.
pub fn first_order_tt(component: &GaussianComponent, j: usize) -> Result<FunctionalTensorTrain> {
    let d = component.dimension();
    if j >= d {
        return Err(Error::Usage(format!("coordinate {j} out of range 0..{d}")));
    }
    let (a, mu) = component.whiten();
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let coef = a[(j, k)];
        if k + 1 < d {
            let c = DMatrix::identity(2, 2);
            let mut l = DMatrix::zeros(2, 2);
            l[(1, 0)] = coef;
            cores.push(Core::new(vec![c, l]));
        } else {
            let c = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
            let l = DMatrix::from_column_slice(2, 1, &[0.0, coef]);
            cores.push(Core::new(vec![c, l]));
        }
    }
    Ok(FunctionalTensorTrain {
        head: vec![mu[j], 1.0],
        cores,
    })
}

fn check_same_dimension(left: &FunctionalTensorTrain, right: &FunctionalTensorTrain) -> Result<()> {
    if left.dimension() != right.dimension() {
        return Err(Error::Usage(format!(
            "trains over {} and {} variables",
            left.dimension(),
            right.dimension()
        )));
    }
    Ok(())
}

/// Train of the pointwise product: heads and cores combine by Kronecker
/// products, with the core polynomials multiplied out degree by degree.
pub fn tt_product(left: &FunctionalTensorTrain, right: &FunctionalTensorTrain) -> Result<FunctionalTensorTrain> {
    check_same_dimension(left, right)?;
    let head = left
        .head
        .iter()
        .flat_map(|a| right.head.iter().map(move |b| a * b))
        .collect();
    let cores = left
        .cores
        .iter()
        .zip(&right.cores)
        .map(|(e, f)| {
            let (rows, cols) = (e.rows() * f.rows(), e.cols() * f.cols());
            let mut coeffs = vec![DMatrix::zeros(rows, cols); e.degree() + f.degree() + 1];
            for (a, ea) in e.coeffs.iter().enumerate() {
                if ea.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for (b, fb) in f.coeffs.iter().enumerate() {
                    coeffs[a + b] += ea.kronecker(fb);
                }
            }
            Core::new(coeffs)
        })
        .collect();
    Ok(FunctionalTensorTrain { head, cores })
}

/// `E[train]` under independent standard normal variables.
pub fn tt_expectation(train: &FunctionalTensorTrain, gauss: &GaussianMoments) -> f64 {
    let mut v = DMatrix::from_row_slice(1, train.head.len(), &train.head);
    for core in &train.cores {
        v *= core.expectation(gauss);
    }
    v[(0, 0)]
}

/// `E[left · right]` without forming the Kronecker train: the running row
/// vector is kept as an `r_left × r_right` matrix `V` and updated per core as
/// `Σ_{a,b} E[η^{a+b}] E_aᵀ V F_b`.
pub fn product_expectation(
    left: &FunctionalTensorTrain,
    right: &FunctionalTensorTrain,
    gauss: &GaussianMoments,
) -> Result<f64> {
    check_same_dimension(left, right)?;
    let mut v = DMatrix::from_fn(left.head.len(), right.head.len(), |i, j| left.head[i] * right.head[j]);
    for (e, f) in left.cores.iter().zip(&right.cores) {
        let mut next = DMatrix::zeros(e.cols(), f.cols());
        for (a, ea) in e.coeffs.iter().enumerate() {
            let left_part = ea.transpose() * &v;
            for (b, fb) in f.coeffs.iter().enumerate() {
                let w = gauss.get(a + b);
                if w != 0.0 {
                    next += (&left_part * fb) * w;
                }
            }
        }
        v = next;
    }
    Ok(v[(0, 0)])
}

/// Default ceiling on the interior rank of an explicitly formed product
/// train; larger products are contracted expectation-first.
pub const DEFAULT_RANK_BUDGET: usize = 1 << 12;

/// Moment engine for one Gaussian component, memoizing the trains of
/// sub-monomials keyed by multi-index.
#[derive(Debug, Clone)]
pub struct ComponentMoments {
    first_order: Vec<FunctionalTensorTrain>,
    trains: HashMap<MultiIndex, FunctionalTensorTrain>,
    gauss: GaussianMoments,
    rank_budget: usize,
}

impl ComponentMoments {
    pub fn new(component: &GaussianComponent) -> Self {
        let d = component.dimension();
        let first_order = (0..d).map(|j| first_order_tt(component, j).expect("j < d")).collect();
        Self {
            first_order,
            trains: HashMap::new(),
            gauss: GaussianMoments::up_to(16),
            rank_budget: DEFAULT_RANK_BUDGET,
        }
    }

    pub fn with_rank_budget(mut self, budget: usize) -> Self {
        self.rank_budget = budget.max(1);
        self
    }

    pub fn dimension(&self) -> usize {
        self.first_order.len()
    }

    /// Builds and caches the trains of every monomial of order `1..=order`;
    /// afterwards moments up to order `2·order` need no further trains.
    pub fn prepare(&mut self, order: usize) -> Result<()> {
        self.gauss = GaussianMoments::up_to(4 * order.max(4));
        let set = MultiIndexSet::enumerate(self.dimension(), order)?;
        for alpha in set.indices().iter().filter(|a| a.order() > 1) {
            if !self.trains.contains_key(alpha) {
                let (a1, a2) = split(alpha)?;
                let t = tt_product(self.train(&a1)?.as_ref(), self.train(&a2)?.as_ref())?;
                self.trains.insert(alpha.clone(), t);
            }
        }
        Ok(())
    }

    /// Train of `ξ^α` (`|α| ≥ 1`), borrowed from the cache when available.
    pub fn train(&self, alpha: &MultiIndex) -> Result<Cow<'_, FunctionalTensorTrain>> {
        self.check(alpha)?;
        match alpha.order() {
            0 => Ok(Cow::Owned(FunctionalTensorTrain::constant(self.dimension(), 1.0))),
            1 => {
                let j = alpha.exponents().iter().position(|&e| e == 1).expect("order 1");
                Ok(Cow::Borrowed(&self.first_order[j]))
            }
            _ => {
                if let Some(t) = self.trains.get(alpha) {
                    return Ok(Cow::Borrowed(t));
                }
                let (a1, a2) = split(alpha)?;
                Ok(Cow::Owned(tt_product(
                    self.train(&a1)?.as_ref(),
                    self.train(&a2)?.as_ref(),
                )?))
            }
        }
    }

    fn check(&self, alpha: &MultiIndex) -> Result<()> {
        if alpha.dimension() != self.dimension() {
            return Err(Error::Usage(format!(
                "multi-index of length {} for a {}-dimensional component",
                alpha.dimension(),
                self.dimension()
            )));
        }
        Ok(())
    }

    /// `q_α = E[ξ^α]` for this component.
    pub fn moment(&self, alpha: &MultiIndex) -> Result<f64> {
        self.check(alpha)?;
        match alpha.order() {
            0 => Ok(1.0),
            1 => Ok(tt_expectation(self.train(alpha)?.as_ref(), &self.gauss)),
            _ => {
                let (a1, a2) = split(alpha)?;
                let (t1, t2) = (self.train(&a1)?, self.train(&a2)?);
                if t1.max_rank() * t2.max_rank() <= self.rank_budget {
                    Ok(tt_expectation(&tt_product(&t1, &t2)?, &self.gauss))
                } else {
                    product_expectation(&t1, &t2, &self.gauss)
                }
            }
        }
    }
}

/// `q_α` for a single component, building a throwaway engine.
pub fn component_moment(component: &GaussianComponent, alpha: &MultiIndex) -> Result<f64> {
    ComponentMoments::new(component).moment(alpha)
}

/// `m_α = Σᵢ wᵢ q_{α,i}`.
pub fn mixture_moment(mix: &GaussianMixture, alpha: &MultiIndex) -> Result<f64> {
    mix.weights()
        .iter()
        .zip(mix.components())
        .map(|(w, c)| component_moment(c, alpha).map(|q| w * q))
        .sum()
}

/// How a table entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TensorTrain,
    Oracle,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::TensorTrain => "tensor-train",
            Provenance::Oracle => "oracle",
        }
    }
}

/// All moments of total order at most `2p`, indexed like
/// `MultiIndexSet::enumerate(d, 2p)`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    index_set: MultiIndexSet,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl MomentTable {
    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        self.index_set.position(alpha).map(|i| self.values[i])
    }

    /// Replaces an entry by an independently computed value.
    pub fn override_with_oracle(&mut self, alpha: &MultiIndex, value: f64) -> Result<()> {
        let i = self
            .index_set
            .position(alpha)
            .ok_or_else(|| Error::Usage(format!("multi-index {alpha:?} not in table")))?;
        self.values[i] = value;
        self.provenance[i] = Provenance::Oracle;
        Ok(())
    }

    /// CSV with columns `alpha,value,provenance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,value,provenance\n");
        for ((a, v), p) in self.index_set.indices().iter().zip(&self.values).zip(&self.provenance) {
            out.push_str(&format!("{},{:.16e},{}\n", a.to_text(), v, p.as_str()));
        }
        out
    }
}

/// Moment table for the basis of order `p` (entries up to order `2p`).
/// First-order trains and all sub-monomial trains up to order `p` are built
/// once per component and shared by every entry.
pub fn moment_table(mix: &GaussianMixture, p: usize) -> Result<MomentTable> {
    let index_set = MultiIndexSet::enumerate(mix.dimension(), 2 * p)?;
    let mut engines = Vec::with_capacity(mix.components().len());
    for c in mix.components() {
        let mut e = ComponentMoments::new(c);
        e.prepare(p)?;
        engines.push(e);
    }
    let entry = |alpha: &MultiIndex| -> Result<f64> {
        if alpha.is_zero() {
            return Ok(1.0);
        }
        let mut total = 0.0;
        for (w, e) in mix.weights().iter().zip(&engines) {
            total += w * e.moment(alpha)?;
        }
        Ok(total)
    };
    #[cfg(feature = "parallel")]
    let values: Result<Vec<f64>> = {
        use rayon::prelude::*;
        index_set.indices().par_iter().map(entry).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Result<Vec<f64>> = index_set.indices().iter().map(entry).collect();
    let values = values?;
    let provenance = vec![Provenance::TensorTrain; values.len()];
    Ok(MomentTable {
        index_set,
        values,
        provenance,
    })
}

/// Largest total order the symbolic oracle accepts.
pub const ORACLE_MAX_ORDER: u32 = 12;

/// Independent check of `E[ξ^α]`: expands `Π_j (Σ_k a_jk η_k + μ_j)^{α_j}`
/// into monomials in `η` per component and applies univariate Gaussian
/// moments term by term. Cost grows combinatorially with `|α|`.
pub fn oracle_moment(mix: &GaussianMixture, alpha: &MultiIndex) -> Result<f64> {
    if alpha.dimension() != mix.dimension() {
        return Err(Error::Usage("multi-index and mixture dimensions differ".into()));
    }
    if alpha.order() > ORACLE_MAX_ORDER {
        return Err(Error::Capacity(format!(
            "oracle limited to |α| ≤ {ORACLE_MAX_ORDER}, got {}",
            alpha.order()
        )));
    }
    let d = mix.dimension();
    let mut total = 0.0;
    for (w, comp) in mix.weights().iter().zip(mix.components()) {
        let (a, mu) = comp.whiten();
        // Polynomial in η: exponent vector -> coefficient.
        let mut poly: HashMap<Vec<u32>, f64> = HashMap::from([(vec![0; d], 1.0)]);
        for (j, &e) in alpha.exponents().iter().enumerate() {
            for _ in 0..e {
                let mut next: HashMap<Vec<u32>, f64> = HashMap::with_capacity(poly.len() * (d + 1));
                for (exps, c) in &poly {
                    *next.entry(exps.clone()).or_insert(0.0) += c * mu[j];
                    for k in 0..d {
                        let ajk = a[(j, k)];
                        if ajk == 0.0 {
                            continue;
                        }
                        let mut ex = exps.clone();
                        ex[k] += 1;
                        *next.entry(ex).or_insert(0.0) += c * ajk;
                    }
                }
                poly = next;
            }
        }
        let q: f64 = poly
            .iter()
            .map(|(exps, c)| c * exps.iter().map(|&k| gaussian_moment(k)).product::<f64>())
            .sum();
        total += w * q;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn comp(mean: &[f64], cov: &[f64]) -> GaussianComponent {
        let d = mean.len();
        GaussianComponent::new(DVector::from_row_slice(mean), DMatrix::from_row_slice(d, d, cov)).unwrap()
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn first_order_chain_values() {
        let c = comp(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let t = first_order_tt(&c, 0).unwrap();
        assert_eq!(t.evaluate(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(t.ranks(), vec![2, 2, 2, 1]);
        let g = GaussianMoments::up_to(8);
        let c = comp(&[1.5, -0.5], &[2.0, 0.3, 0.3, 1.0]);
        assert!((tt_expectation(&first_order_tt(&c, 0).unwrap(), &g) - 1.5).abs() < 1e-15);
        assert!((tt_expectation(&first_order_tt(&c, 1).unwrap(), &g) + 0.5).abs() < 1e-15);
        assert!(first_order_tt(&c, 2).is_err());
    }

    #[test]
    fn square_and_fourth_power() {
        let c = comp(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        let t = first_order_tt(&c, 0).unwrap();
        let sq = tt_product(&t, &t).unwrap();
        for eta in [[0.3, -1.0], [2.0, 0.5], [-1.1, 4.0]] {
            assert!((sq.evaluate(&eta).unwrap() - eta[0] * eta[0]).abs() < 1e-14);
        }
        assert_eq!(sq.ranks(), vec![4, 4, 1]);
        let g = GaussianMoments::up_to(8);
        assert!((tt_expectation(&sq, &g) - 1.0).abs() < 1e-15);
        let fourth = tt_product(&sq, &sq).unwrap();
        // Gauss–Hermite (probabilists', 3 nodes) integrates η⁴ exactly:
        // nodes 0, ±√3 with weights 2/3, 1/6.
        let quad = 2.0 / 3.0 * 0.0 + 2.0 * (1.0 / 6.0) * 9.0;
        assert!((tt_expectation(&fourth, &g) - quad).abs() < 1e-13);
        assert!((product_expectation(&sq, &sq, &g).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn product_dimension_mismatch() {
        let a = FunctionalTensorTrain::constant(2, 1.0);
        let b = FunctionalTensorTrain::constant(3, 1.0);
        assert!(matches!(tt_product(&a, &b), Err(Error::Usage(_))));
    }

    #[test]
    fn correlated_pair_moment_is_covariance() {
        let c = comp(&[0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]);
        assert!((component_moment(&c, &mi(&[1, 1])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(component_moment(&c, &mi(&[0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn mixture_weighted_moments() {
        let m = GaussianMixture::new(vec![0.5, 0.5], vec![comp(&[0.0], &[1.0]), comp(&[1.0], &[1.0])]).unwrap();
        assert!((mixture_moment(&m, &mi(&[1])).unwrap() - 0.5).abs() < 1e-15);
        assert!((mixture_moment(&m, &mi(&[2])).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn standard_normal_table() {
        let m = GaussianMixture::standard_normal(2).unwrap();
        let t = moment_table(&m, 1).unwrap();
        assert_eq!(t.values(), &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(t
            .to_csv()
            .starts_with("alpha,value,provenance\n0 0,1.0000000000000000e0,tensor-train\n"));
    }

    #[test]
    fn expectation_first_fallback_agrees() {
        let c = comp(&[0.3, -0.2, 0.5], &[1.0, 0.2, 0.1, 0.2, 0.8, -0.3, 0.1, -0.3, 1.2]);
        let full = ComponentMoments::new(&c);
        let lean = ComponentMoments::new(&c).with_rank_budget(1);
        for a in MultiIndexSet::enumerate(3, 6).unwrap().indices() {
            let x = full.moment(a).unwrap();
            let y = lean.moment(a).unwrap();
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{a:?}: {x} vs {y}");
        }
    }

    #[test]
    fn constant_train_scales_expectation() {
        let c = comp(&[0.4, 1.0], &[1.0, 0.3, 0.3, 2.0]);
        let e = ComponentMoments::new(&c);
        let t = e.train(&mi(&[2, 1])).unwrap();
        let g = GaussianMoments::up_to(8);
        let base = tt_expectation(&t, &g);
        let scaled = tt_expectation(&tt_product(&t, &FunctionalTensorTrain::constant(2, -3.5)).unwrap(), &g);
        assert!((scaled + 3.5 * base).abs() < 1e-13 * base.abs().max(1.0));
    }

    #[test]
    fn oracle_limits() {
        let m = GaussianMixture::standard_normal(1).unwrap();
        assert_eq!(oracle_moment(&m, &mi(&[0])).unwrap(), 1.0);
        assert_eq!(oracle_moment(&m, &mi(&[5])).unwrap(), 0.0);
        assert!(matches!(oracle_moment(&m, &mi(&[13])), Err(Error::Capacity(_))));
    }
}
