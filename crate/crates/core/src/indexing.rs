//! Multi-indices, their graded-lexicographic enumeration and monomial
//! evaluation. Every module that maps between exponent vectors and matrix
//! positions goes through this ordering.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `α ∈ ℕ^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// `ξ_j` as a multi-index.
    pub fn unit(d: usize, j: usize) -> Self {
        let mut e = vec![0; d];
        e[j] = 1;
        Self(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Total order `|α|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dimension(), other.dimension());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Entries at `coords`, in that order.
    pub fn restrict(&self, coords: &[usize]) -> MultiIndex {
        MultiIndex(coords.iter().map(|&i| self.0[i]).collect())
    }

    /// Graded-lexicographic comparison: lower total order first; within an
    /// order, the vector with the larger leading exponent comes first, so
    /// `ξ₁` precedes `ξ₂` and `ξ₁²` precedes `ξ₁ξ₂`.
    pub fn graded_lex_cmp(&self, other: &MultiIndex) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| other.0.cmp(&self.0))
    }

    /// Space-separated exponents, the textual form used in CSV dumps.
    pub fn to_text(&self) -> String {
        self.0.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
    }
}

/// `C(d + p, d)` with overflow reported instead of wrapped.
pub fn basis_size(d: usize, p: usize) -> Result<usize> {
    let mut acc: u128 = 1;
    let k = d.min(p) as u128;
    let n = (d + p) as u128;
    for i in 0..k {
        acc = acc
            .checked_mul(n - i)
            .ok_or_else(|| Error::Capacity(format!("C({}, {}) overflows", d + p, d)))?
            / (i + 1);
    }
    usize::try_from(acc).map_err(|_| Error::Capacity(format!("C({}, {}) exceeds usize", d + p, d)))
}

/// All multi-indices of dimension `d` and total order at most `p`, in
/// graded-lexicographic order, with a reverse lookup table.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    d: usize,
    p: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

impl MultiIndexSet {
    /// Hard ceiling on the number of indices a set may hold.
    pub const MAX_SIZE: usize = 1 << 26;

    pub fn enumerate(d: usize, p: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Usage("dimension must be at least 1".into()));
        }
        let n = basis_size(d, p)?;
        if n > Self::MAX_SIZE {
            return Err(Error::Capacity(format!(
                "{n} multi-indices for d = {d}, p = {p} exceeds the limit of {}",
                Self::MAX_SIZE
            )));
        }
        let mut indices = Vec::with_capacity(n);
        let mut current = vec![0u32; d];
        for order in 0..=p as u32 {
            push_compositions(order, 0, &mut current, &mut indices);
        }
        debug_assert_eq!(indices.len(), n);
        let position = indices.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Ok(Self {
            d,
            p,
            indices,
            position,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn max_order(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, position: usize) -> &MultiIndex {
        &self.indices[position]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    /// Number of indices with total order at most `order`.
    pub fn count_up_to(&self, order: usize) -> usize {
        self.indices.partition_point(|a| a.order() as usize <= order)
    }
}

/// Appends all exponent vectors with `remaining` spread over coordinates
/// `pos..`, larger leading exponents first.
fn push_compositions(remaining: u32, pos: usize, current: &mut [u32], out: &mut Vec<MultiIndex>) {
    let d = current.len();
    if pos == d - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_compositions(remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Deterministic split `α = α₁ + α₂` with `|α₁| = ⌈|α|/2⌉`.
///
/// Walks the coordinates left to right, moving `⌈α_k/2⌉` (capped by what is
/// still missing) into `α₁`; the remainder forms `α₂`.
pub fn split(alpha: &MultiIndex) -> Result<(MultiIndex, MultiIndex)> {
    let total = alpha.order();
    if total <= 1 {
        return Err(Error::Usage(format!("split needs |α| > 1, got |α| = {total}")));
    }
    let target = total.div_ceil(2);
    let mut first = vec![0u32; alpha.dimension()];
    let mut taken = 0;
    for (k, &a) in alpha.exponents().iter().enumerate() {
        if taken == target {
            break;
        }
        let mv = a.div_ceil(2).min(target - taken);
        first[k] = mv;
        taken += mv;
    }
    let second = alpha.exponents().iter().zip(&first).map(|(a, f)| a - f).collect();
    Ok((MultiIndex(first), MultiIndex(second)))
}

/// `x^k` by repeated squaring.
pub fn pow_by_squaring(mut x: f64, mut k: u32) -> f64 {
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= x;
        }
        x *= x;
        k >>= 1;
    }
    acc
}

/// `ξ^α = Π ξ_k^{α_k}`; `1` for `α = 0`.
pub fn monomial_eval(alpha: &MultiIndex, point: &[f64]) -> Result<f64> {
    if alpha.dimension() != point.len() {
        return Err(Error::Usage(format!(
            "multi-index has {} entries, point has {}",
            alpha.dimension(),
            point.len()
        )));
    }
    Ok(alpha
        .exponents()
        .iter()
        .zip(point)
        .filter(|(e, _)| **e > 0)
        .map(|(&e, &x)| pow_by_squaring(x, e))
        .product())
}

/// Table of `ξ_i^k` for one point, `k ≤ max_power`, so that a full monomial
/// vector costs one product per nonzero exponent.
#[derive(Debug, Clone)]
pub struct PowerCache {
    stride: usize,
    powers: Vec<f64>,
}

impl PowerCache {
    pub fn new(max_power: usize) -> Self {
        Self {
            stride: max_power + 1,
            powers: Vec::new(),
        }
    }

    pub fn fill(&mut self, point: &[f64]) {
        self.powers.clear();
        self.powers.reserve(point.len() * self.stride);
        for &x in point {
            for k in 0..self.stride {
                self.powers.push(pow_by_squaring(x, k as u32));
            }
        }
    }

    pub fn monomial(&self, alpha: &MultiIndex) -> f64 {
        alpha
            .exponents()
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(i, &e)| self.powers[i * self.stride + e as usize])
            .product()
    }
}
