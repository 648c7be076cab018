//! Orthonormal polynomial basis `Ψ(ξ) = L⁻¹ b(ξ)` where `b` is the vector of
//! monomials in graded-lexicographic order and `L Lᵀ = M = E[b bᵀ]`.
//!
//! Blocks of independent coordinates get their own bases (mixture blocks by
//! the Cholesky route, Gaussian and gamma marginals by three-term
//! recurrences) which are multiplied together under a global total-order
//! truncation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{GroupLaw, ParameterGroups, Univariate};
use crate::indexing::{MultiIndex, MultiIndexSet, PowerCache};
use crate::linalg;
use crate::moments::{moment_table, MomentTable};

/// `M_ij = E[b_i(ξ) b_j(ξ)]` for the monomials of one index set.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    matrix: DMatrix<f64>,
    index_set: MultiIndexSet,
}

impl MomentMatrix {
    /// Wraps an explicit symmetric matrix, e.g. for conditioning experiments.
    pub fn from_matrix(matrix: DMatrix<f64>, index_set: MultiIndexSet) -> Result<Self> {
        let n = index_set.len();
        if matrix.shape() != (n, n) {
            return Err(Error::Usage(format!(
                "moment matrix is {}x{}, index set has {n} entries",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, index_set })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }
}

/// Looks up `M_ij = m_{α_i + α_j}`.
pub fn build_moment_matrix(table: &MomentTable, idx: &MultiIndexSet) -> Result<MomentMatrix> {
    if table.index_set().dimension() != idx.dimension() {
        return Err(Error::Internal("moment table and index set differ in dimension".into()));
    }
    let n = idx.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let alpha = idx.get(i).add(idx.get(j));
            let v = table.get(&alpha).ok_or_else(|| {
                Error::Internal(format!(
                    "moment table of order {} lacks entry {:?}",
                    table.index_set().max_order(),
                    alpha.exponents()
                ))
            })?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(MomentMatrix {
        matrix: m,
        index_set: idx.clone(),
    })
}

/// Regularization schedule for the moment-matrix factorization. All
/// quantities except `pivot_floor` are relative to `trace(M)/n`;
/// `pivot_floor` is relative to the diagonal entry of the row being
/// eliminated, which makes it insensitive to the scaling of ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsPolicy {
    pub start: f64,
    pub max: f64,
    pub growth: f64,
    pub pivot_floor: f64,
}

impl Default for EpsPolicy {
    fn default() -> Self {
        Self {
            start: 1e-12,
            max: 1e-6,
            growth: 10.0,
            pivot_floor: 1e-10,
        }
    }
}

/// Cholesky factor of a (possibly regularized) moment matrix.
#[derive(Debug, Clone)]
pub struct CholeskyBasis {
    l: DMatrix<f64>,
    epsilon: f64,
    min_pivot: f64,
    max_pivot: f64,
}

impl CholeskyBasis {
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Absolute ε added to the non-constant diagonal entries (0 if none).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Ratio of the extreme Cholesky pivots.
    pub fn condition_estimate(&self) -> f64 {
        self.max_pivot / self.min_pivot
    }

    fn eval_prefix(&self, index_set: &MultiIndexSet, cache: &mut PowerCache, point: &[f64], out: &mut [f64]) {
        cache.fill(point);
        let len = out.len();
        for (o, a) in out.iter_mut().zip(index_set.indices()) {
            *o = cache.monomial(a);
        }
        linalg::forward_substitute_prefix(&self.l, out, len);
    }
}

fn relative_pivots_ok(pivots: &[f64], diag: &[f64], floor: f64) -> bool {
    pivots.iter().zip(diag).all(|(p, d)| *p >= floor * d.abs())
}

/// Factors `M` (regularizing if needed) into a basis.
///
/// Plain Cholesky is tried first. If it breaks down or some pivot falls
/// below `pivot_floor` times its diagonal entry, ε is added to every
/// diagonal entry except the constant monomial's (so `Ψ₀ ≡ 1` survives),
/// starting at `start·trace(M)/n` and growing by `growth` up to
/// `max·trace(M)/n`.
pub fn factorize(m: &MomentMatrix, policy: &EpsPolicy) -> Result<BasisSet> {
    let chol = factorize_matrix(&m.matrix, policy)?;
    Ok(BasisSet {
        d: m.index_set.dimension(),
        p: m.index_set.max_order(),
        index_set: m.index_set.clone(),
        repr: Repr::Cholesky(chol),
    })
}

fn factorize_matrix(mat: &DMatrix<f64>, policy: &EpsPolicy) -> Result<CholeskyBasis> {
    let n = mat.nrows();
    if n == 0 {
        return Err(Error::Usage("empty moment matrix".into()));
    }
    let scale = mat.diagonal().sum() / n as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Numerical(format!(
            "moment matrix ({n}x{n}) has non-positive trace/n = {scale:.3e}"
        )));
    }
    for i in 0..n {
        for j in 0..i {
            if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale.abs().max(1.0) {
                return Err(Error::Validation(format!("moment matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut eps = 0.0;
    let mut worst_pivot;
    loop {
        let mut work = mat.clone();
        for i in 1..n {
            work[(i, i)] += eps;
        }
        let diag: Vec<f64> = work.diagonal().iter().copied().collect();
        match linalg::cholesky(&work) {
            Some(f) if relative_pivots_ok(&f.pivots, &diag, policy.pivot_floor) => {
                if eps > 0.0 {
                    log::warn!(
                        "moment matrix regularized with epsilon = {eps:.3e} ({:.0e} x trace/n)",
                        eps / scale
                    );
                }
                let (min_pivot, max_pivot) = (f.min_pivot(), f.max_pivot());
                log::info!("moment matrix condition estimate {:.3e}", max_pivot / min_pivot);
                return Ok(CholeskyBasis {
                    l: f.l,
                    epsilon: eps,
                    min_pivot,
                    max_pivot,
                });
            }
            Some(f) => {
                worst_pivot = f
                    .pivots
                    .iter()
                    .zip(&diag)
                    .map(|(p, d)| p / d.abs())
                    .fold(f64::INFINITY, f64::min)
            }
            None => worst_pivot = 0.0,
        }
        eps = if eps == 0.0 {
            policy.start * scale
        } else {
            eps * policy.growth
        };
        if eps > policy.max * scale * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "moment matrix ({n}x{n}, trace/n = {scale:.3e}) is not positive definite after \
                 regularization up to {:.1e} x trace/n; smallest relative pivot at the last attempt \
                 {worst_pivot:.3e}",
                policy.max
            )));
        }
    }
}

/// Orthonormal three-term recurrence for one standardized variable `z`:
/// `√b_{k+1} p_{k+1} = (z − a_k) p_k − √b_k p_{k−1}`, `p₀ = 1`.
#[derive(Debug, Clone)]
struct Recurrence {
    a: Vec<f64>,
    sqrt_b: Vec<f64>,
}

impl Recurrence {
    fn for_law(law: &Univariate, p: usize) -> Self {
        let (a, b): (Vec<f64>, Vec<f64>) = match *law {
            // Probabilists' Hermite.
            Univariate::Gaussian { .. } => (0..=p).map(|k| (0.0, k as f64)).unzip(),
            // Laguerre with parameter shape − 1.
            Univariate::Gamma { shape, .. } => (0..=p)
                .map(|k| {
                    let k = k as f64;
                    (2.0 * k + shape, k * (k + shape - 1.0))
                })
                .unzip(),
        };
        Self {
            a,
            sqrt_b: b.into_iter().map(f64::sqrt).collect(),
        }
    }

    fn standardize(law: &Univariate, x: f64) -> f64 {
        match *law {
            Univariate::Gaussian { mean, std } => (x - mean) / std,
            Univariate::Gamma { scale, .. } => x / scale,
        }
    }

    fn eval(&self, z: f64, out: &mut [f64]) {
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = (z - self.a[0]) / self.sqrt_b[1];
        }
        for k in 1..out.len() - 1 {
            out[k + 1] = ((z - self.a[k]) * out[k] - self.sqrt_b[k] * out[k - 1]) / self.sqrt_b[k + 1];
        }
    }
}

#[derive(Debug, Clone)]
enum GroupBasisKind {
    Mixture {
        index_set: MultiIndexSet,
        basis: CholeskyBasis,
    },
    Univariate {
        law: Univariate,
        recurrence: Recurrence,
    },
}

#[derive(Debug, Clone)]
struct GroupBasis {
    coords: Vec<usize>,
    kind: GroupBasisKind,
}

impl GroupBasis {
    fn len(&self) -> usize {
        match &self.kind {
            GroupBasisKind::Mixture { index_set, .. } => index_set.len(),
            GroupBasisKind::Univariate { recurrence, .. } => recurrence.a.len(),
        }
    }

    fn local_position(&self, alpha: &MultiIndex) -> Option<usize> {
        let sub = alpha.restrict(&self.coords);
        match &self.kind {
            GroupBasisKind::Mixture { index_set, .. } => index_set.position(&sub),
            GroupBasisKind::Univariate { .. } => Some(sub.order() as usize),
        }
    }

    fn eval(&self, cache: &mut PowerCache, point: &[f64], sub: &mut Vec<f64>, out: &mut [f64]) {
        sub.clear();
        sub.extend(self.coords.iter().map(|&i| point[i]));
        match &self.kind {
            GroupBasisKind::Mixture { index_set, basis } => basis.eval_prefix(index_set, cache, sub, out),
            GroupBasisKind::Univariate { law, recurrence } => {
                recurrence.eval(Recurrence::standardize(law, sub[0]), out)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct GroupedBasis {
    groups: Vec<GroupBasis>,
    /// For each global basis function, its local position in every group.
    positions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum Repr {
    Cholesky(CholeskyBasis),
    Grouped(GroupedBasis),
}

/// Orthonormal basis over `d` coordinates truncated at total order `p`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    d: usize,
    p: usize,
    index_set: MultiIndexSet,
    repr: Repr,
}

impl BasisSet {
    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Number of basis functions `n = C(d + p, d)`.
    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    /// Cholesky data when the basis came from a single moment matrix.
    pub fn cholesky(&self) -> Option<&CholeskyBasis> {
        match &self.repr {
            Repr::Cholesky(c) => Some(c),
            Repr::Grouped(_) => None,
        }
    }

    /// Largest ε applied to any block (0 when unregularized).
    pub fn epsilon(&self) -> f64 {
        match &self.repr {
            Repr::Cholesky(c) => c.epsilon,
            Repr::Grouped(g) => g
                .groups
                .iter()
                .map(|gb| match &gb.kind {
                    GroupBasisKind::Mixture { basis, .. } => basis.epsilon,
                    GroupBasisKind::Univariate { .. } => 0.0,
                })
                .fold(0.0, f64::max),
        }
    }

    /// Worst pivot-ratio condition estimate over the Cholesky blocks.
    pub fn condition_estimate(&self) -> f64 {
        match &self.repr {
            Repr::Cholesky(c) => c.condition_estimate(),
            Repr::Grouped(g) => g
                .groups
                .iter()
                .map(|gb| match &gb.kind {
                    GroupBasisKind::Mixture { basis, .. } => basis.condition_estimate(),
                    GroupBasisKind::Univariate { .. } => 1.0,
                })
                .fold(1.0, f64::max),
        }
    }

    /// Writes `Ψ₀(x), …, Ψ_{len−1}(x)` into `out`; only the leading
    /// `out.len()` functions are computed.
    pub fn eval_point_into(&self, point: &[f64], out: &mut [f64]) {
        let mut scratch = Scratch::new(self);
        self.eval_with(&mut scratch, point, out);
    }

    fn eval_with(&self, scratch: &mut Scratch, point: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Cholesky(c) => c.eval_prefix(&self.index_set, &mut scratch.cache, point, out),
            Repr::Grouped(g) => {
                for (gb, vals) in g.groups.iter().zip(scratch.local.iter_mut()) {
                    gb.eval(&mut scratch.cache, point, &mut scratch.sub, vals);
                }
                for (o, pos) in out.iter_mut().zip(&g.positions) {
                    *o = pos.iter().zip(&scratch.local).map(|(&k, vals)| vals[k]).product();
                }
            }
        }
    }

    /// Design matrix `Φ_kj = Ψ_j(ξ_k)` for the rows of `points`.
    pub fn eval_basis(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.eval_leading(points, self.len())
    }

    /// First `count` columns of the design matrix.
    pub fn eval_leading(&self, points: &DMatrix<f64>, count: usize) -> Result<DMatrix<f64>> {
        if points.ncols() != self.d {
            return Err(Error::Usage(format!(
                "points have {} columns, basis dimension is {}",
                points.ncols(),
                self.d
            )));
        }
        let count = count.min(self.len());
        let m = points.nrows();
        let mut rows = vec![0.0; m * count];
        let fill = |(r, chunk): (usize, &mut [f64]), scratch: &mut Scratch| {
            let p: Vec<f64> = points.row(r).iter().copied().collect();
            self.eval_with(scratch, &p, chunk);
        };
        if count > 0 {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                rows.par_chunks_mut(count)
                    .enumerate()
                    .for_each_init(|| Scratch::new(self), |s, item| fill(item, s));
            }
            #[cfg(not(feature = "parallel"))]
            {
                let mut s = Scratch::new(self);
                rows.chunks_mut(count).enumerate().for_each(|item| fill(item, &mut s));
            }
        }
        Ok(DMatrix::from_row_slice(m, count, &rows))
    }

    /// Coefficients in this basis of the polynomial `c₀ᵀ b(ξ)`: `c = Lᵀ c₀`.
    /// Only defined for a single Cholesky block.
    pub fn monomial_to_basis_coefficients(&self, c0: &[f64]) -> Result<Vec<f64>> {
        let chol = self
            .cholesky()
            .ok_or_else(|| Error::Usage("monomial coefficients need a single-block basis".into()))?;
        if c0.len() != self.len() {
            return Err(Error::Usage(format!(
                "{} coefficients for {} monomials",
                c0.len(),
                self.len()
            )));
        }
        let l = &chol.l;
        Ok((0..self.len())
            .map(|i| (i..self.len()).map(|k| l[(k, i)] * c0[k]).sum())
            .collect())
    }

    /// `L⁻¹ M L⁻ᵀ`, computed with triangular solves; equals the identity
    /// for the (regularized) moment matrix the basis was built from.
    pub fn whitened_gram(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let chol = self
            .cholesky()
            .ok_or_else(|| Error::Usage("whitened Gram needs a single-block basis".into()))?;
        let n = self.len();
        if m.shape() != (n, n) {
            return Err(Error::Usage("matrix size does not match basis".into()));
        }
        let mut x = m.clone();
        for j in 0..n {
            let mut col: Vec<f64> = x.column(j).iter().copied().collect();
            linalg::forward_substitute(&chol.l, &mut col);
            x.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        let mut y = x.transpose();
        for j in 0..n {
            let mut col: Vec<f64> = y.column(j).iter().copied().collect();
            linalg::forward_substitute(&chol.l, &mut col);
            y.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        Ok(y)
    }

    /// Portable description sufficient to rebuild the evaluator.
    pub fn export(&self) -> BasisExport {
        match &self.repr {
            Repr::Cholesky(c) => BasisExport::Cholesky(export_cholesky(&self.index_set, c)),
            Repr::Grouped(g) => BasisExport::Grouped(GroupedExport {
                d: self.d,
                p: self.p,
                index_set: self.index_set.indices().to_vec(),
                groups: g
                    .groups
                    .iter()
                    .map(|gb| GroupExport {
                        indices: gb.coords.clone(),
                        basis: match &gb.kind {
                            GroupBasisKind::Mixture { index_set, basis } => {
                                GroupBasisExport::Cholesky(export_cholesky(index_set, basis))
                            }
                            GroupBasisKind::Univariate { law, .. } => GroupBasisExport::Univariate(*law),
                        },
                    })
                    .collect(),
            }),
        }
    }

    pub fn from_export(export: &BasisExport) -> Result<Self> {
        match export {
            BasisExport::Cholesky(c) => {
                let (index_set, basis) = import_cholesky(c)?;
                Ok(Self {
                    d: c.d,
                    p: c.p,
                    index_set,
                    repr: Repr::Cholesky(basis),
                })
            }
            BasisExport::Grouped(g) => {
                let mut groups = Vec::with_capacity(g.groups.len());
                for ge in &g.groups {
                    let kind = match &ge.basis {
                        GroupBasisExport::Cholesky(c) => {
                            let (index_set, basis) = import_cholesky(c)?;
                            GroupBasisKind::Mixture { index_set, basis }
                        }
                        GroupBasisExport::Univariate(law) => GroupBasisKind::Univariate {
                            law: *law,
                            recurrence: Recurrence::for_law(law, g.p),
                        },
                    };
                    groups.push(GroupBasis {
                        coords: ge.indices.clone(),
                        kind,
                    });
                }
                let index_set = MultiIndexSet::enumerate(g.d, g.p)?;
                if index_set.indices() != g.index_set.as_slice() {
                    return Err(Error::Validation("exported index set is not graded-lex order".into()));
                }
                grouped_from_parts(g.d, g.p, index_set, groups)
            }
        }
    }
}

struct Scratch {
    cache: PowerCache,
    sub: Vec<f64>,
    local: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(basis: &BasisSet) -> Self {
        let local = match &basis.repr {
            Repr::Cholesky(_) => Vec::new(),
            Repr::Grouped(g) => g.groups.iter().map(|gb| vec![0.0; gb.len()]).collect(),
        };
        Self {
            cache: PowerCache::new(basis.p),
            sub: Vec::new(),
            local,
        }
    }
}

fn export_cholesky(index_set: &MultiIndexSet, c: &CholeskyBasis) -> CholeskyExport {
    let n = index_set.len();
    let mut lower = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            lower.push(c.l[(i, j)]);
        }
    }
    CholeskyExport {
        d: index_set.dimension(),
        p: index_set.max_order(),
        index_set: index_set.indices().to_vec(),
        l_lower: lower,
        epsilon: c.epsilon,
        condition_estimate: c.condition_estimate(),
    }
}

fn import_cholesky(c: &CholeskyExport) -> Result<(MultiIndexSet, CholeskyBasis)> {
    let index_set = MultiIndexSet::enumerate(c.d, c.p)?;
    if index_set.indices() != c.index_set.as_slice() {
        return Err(Error::Validation("exported index set is not graded-lex order".into()));
    }
    let n = index_set.len();
    if c.l_lower.len() != n * (n + 1) / 2 {
        return Err(Error::Validation(format!(
            "lower triangle has {} entries, expected {}",
            c.l_lower.len(),
            n * (n + 1) / 2
        )));
    }
    let mut l = DMatrix::zeros(n, n);
    let mut it = c.l_lower.iter();
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = *it.next().expect("length checked");
        }
    }
    let pivots: Vec<f64> = (0..n).map(|i| l[(i, i)] * l[(i, i)]).collect();
    if pivots.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Validation("exported factor has a non-positive diagonal".into()));
    }
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let max_pivot = pivots.iter().copied().fold(0.0, f64::max);
    Ok((
        index_set,
        CholeskyBasis {
            l,
            epsilon: c.epsilon,
            min_pivot,
            max_pivot,
        },
    ))
}

fn grouped_from_parts(d: usize, p: usize, index_set: MultiIndexSet, groups: Vec<GroupBasis>) -> Result<BasisSet> {
    let positions = index_set
        .indices()
        .iter()
        .map(|a| {
            groups
                .iter()
                .map(|g| {
                    g.local_position(a)
                        .ok_or_else(|| Error::Internal(format!("no local basis function for {a:?}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasisSet {
        d,
        p,
        index_set,
        repr: Repr::Grouped(GroupedBasis { groups, positions }),
    })
}

/// Builds the basis for a block-structured input. A single mixture block in
/// natural order takes the plain moment-matrix route.
pub fn build_grouped_basis(groups: &ParameterGroups, p: usize, policy: &EpsPolicy) -> Result<BasisSet> {
    if let Some(mix) = groups.as_single_mixture() {
        let table = moment_table(mix, p)?;
        let idx = MultiIndexSet::enumerate(mix.dimension(), p)?;
        return factorize(&build_moment_matrix(&table, &idx)?, policy);
    }
    let mut parts = Vec::with_capacity(groups.groups().len());
    for g in groups.groups() {
        let kind = match &g.law {
            GroupLaw::Mixture(mix) => {
                let idx = MultiIndexSet::enumerate(mix.dimension(), p)?;
                let table = moment_table(mix, p)?;
                let mm = build_moment_matrix(&table, &idx)?;
                let basis = factorize_matrix(mm.matrix(), policy)?;
                GroupBasisKind::Mixture { index_set: idx, basis }
            }
            GroupLaw::Univariate(law) => GroupBasisKind::Univariate {
                law: *law,
                recurrence: Recurrence::for_law(law, p),
            },
        };
        parts.push(GroupBasis {
            coords: g.indices.clone(),
            kind,
        });
    }
    grouped_from_parts(
        groups.dimension(),
        p,
        MultiIndexSet::enumerate(groups.dimension(), p)?,
        parts,
    )
}

/// Convenience: moment table, moment matrix and factorization for one
/// mixture.
pub fn build_basis(mix: &crate::gmm::GaussianMixture, p: usize, policy: &EpsPolicy) -> Result<BasisSet> {
    build_grouped_basis(&ParameterGroups::single(mix.clone()), p, policy)
}

/// Serialized basis; `kind` selects the layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisExport {
    Cholesky(CholeskyExport),
    Grouped(GroupedExport),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CholeskyExport {
    pub d: usize,
    pub p: usize,
    pub index_set: Vec<MultiIndex>,
    /// Row-major lower triangle of `L`, `n(n+1)/2` entries.
    pub l_lower: Vec<f64>,
    pub epsilon: f64,
    pub condition_estimate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupedExport {
    pub d: usize,
    pub p: usize,
    pub index_set: Vec<MultiIndex>,
    pub groups: Vec<GroupExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupExport {
    pub indices: Vec<usize>,
    pub basis: GroupBasisExport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupBasisExport {
    Cholesky(CholeskyExport),
    Univariate(Univariate),
}
