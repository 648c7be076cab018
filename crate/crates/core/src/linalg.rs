//! Small dense kernels the rest of the crate shares: a pivot-reporting
//! Cholesky, triangular solves, column-pivoted Householder QR and a
//! QR/SVD least-squares solver.

use nalgebra::{DMatrix, DVector};

/// Lower Cholesky factor together with the pivots `L_ii²` it produced.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub l: DMatrix<f64>,
    pub pivots: Vec<f64>,
}

impl CholeskyFactor {
    pub fn min_pivot(&self) -> f64 {
        self.pivots.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_pivot(&self) -> f64 {
        self.pivots.iter().copied().fold(0.0, f64::max)
    }

    /// Ratio of extreme pivots; approximates the spectral condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.max_pivot() / self.min_pivot()
    }
}

/// Cholesky factorization of a symmetric matrix, reading only its lower
/// triangle. Returns `None` as soon as a pivot is not strictly positive.
pub fn cholesky(m: &DMatrix<f64>) -> Option<CholeskyFactor> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut pivots = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        pivots.push(d);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(CholeskyFactor { l, pivots })
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, x: &mut [f64]) {
    forward_substitute_prefix(l, x, x.len());
}

/// Forward substitution restricted to the leading `len` unknowns.
pub fn forward_substitute_prefix(l: &DMatrix<f64>, x: &mut [f64], len: usize) {
    for i in 0..len {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn backward_substitute_transpose(l: &DMatrix<f64>, x: &mut [f64]) {
    let n = x.len();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky
/// factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let f = cholesky(m)?;
    let n = m.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        forward_substitute(&f.l, &mut col);
        backward_substitute_transpose(&f.l, &mut col);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Some(inv.symmetrize())
}

trait Symmetrize {
    fn symmetrize(self) -> Self;
}

impl Symmetrize for DMatrix<f64> {
    fn symmetrize(self) -> Self {
        let t = self.transpose();
        (self + t) * 0.5
    }
}

/// Leading part of a column-pivoted Householder QR.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Column order chosen by the pivoting, first `steps` entries meaningful.
    pub permutation: Vec<usize>,
    /// Diagonal of `R` for the computed steps, non-increasing in magnitude
    /// up to rounding.
    pub r_diagonal: Vec<f64>,
}

/// Businger–Golub column-pivoted QR of `a`, stopped after `steps` columns.
///
/// At every step the remaining column with the largest residual norm is
/// moved forward (ties go to the lower original index). Residual norms are
/// recomputed rather than downdated.
pub fn pivoted_qr(a: &DMatrix<f64>, steps: usize) -> PivotedQr {
    let (rows, cols) = a.shape();
    let steps = steps.min(rows).min(cols);
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut r_diagonal = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..cols {
            let norm2: f64 = (k..rows).map(|i| w[(i, j)] * w[(i, j)]).sum();
            if norm2 > best_norm || (norm2 == best_norm && perm[j] < perm[best]) {
                best_norm = norm2;
                best = j;
            }
        }
        if best != k {
            w.swap_columns(k, best);
            perm.swap(k, best);
        }
        let alpha = best_norm.max(0.0).sqrt();
        if alpha == 0.0 {
            r_diagonal.push(0.0);
            continue;
        }
        // Householder vector v = x + sign(x_k)·‖x‖·e_k.
        let sign = if w[(k, k)] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (k..rows).map(|i| w[(i, k)]).collect();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        r_diagonal.push(-sign * alpha);
        if vnorm2 == 0.0 {
            continue;
        }
        for j in (k + 1)..cols {
            let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * w[(k + t, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                w[(k + t, j)] -= f * vi;
            }
        }
        w[(k, k)] = -sign * alpha;
        for i in (k + 1)..rows {
            w[(i, k)] = 0.0;
        }
    }
    PivotedQr {
        permutation: perm,
        r_diagonal,
    }
}

/// Outcome of a dense least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    /// Set when `R` was numerically singular and the minimum-norm SVD
    /// solution was returned instead.
    pub rank_deficient: bool,
}

/// Relative threshold on `|R_ii|` below which a column set is treated as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `argmin ‖A x − b‖₂` through Householder QR; falls back to the SVD
/// minimum-norm solution when `A` does not have full column rank.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return LeastSquares {
            solution: DVector::zeros(0),
            rank_deficient: false,
        };
    }
    if rows >= cols {
        let qr = a.clone().qr();
        let r = qr.r();
        let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let min_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if max_diag > 0.0 && min_diag > RANK_TOLERANCE * max_diag {
            let mut qtb = b.clone();
            qr.q_tr_mul(&mut qtb);
            let top = qtb.rows(0, cols).into_owned();
            if let Some(x) = r.solve_upper_triangular(&top) {
                return LeastSquares {
                    solution: x,
                    rank_deficient: false,
                };
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let solution = svd
        .solve(b, RANK_TOLERANCE * max_sv.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(cols));
    LeastSquares {
        solution,
        rank_deficient: true,
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Relative Frobenius distance `‖a − b‖_F / ‖b‖_F` (absolute when `b = 0`).
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
