mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ttpce::basis::{build_basis, build_grouped_basis, EpsPolicy};
use ttpce::gmm::{seeded_rng, GaussianMixture, GroupLaw, ParameterGroup, ParameterGroups, Univariate};

use common::{monomial, random_mixture};

/// Counts entries of `E[ΨΨᵀ]` farther than `sigmas` standard errors from
/// the identity.
fn mc_gram_violations(phi_rows: impl Iterator<Item = DMatrix<f64>>, n: usize, sigmas: f64) -> (usize, usize) {
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    let mut count = 0usize;
    for phi in phi_rows {
        count += phi.nrows();
        sum += phi.tr_mul(&phi);
        let sq = phi.map(|v| v * v);
        sum_sq += sq.tr_mul(&sq);
    }
    let c = count as f64;
    let mut bad = 0;
    for i in 0..n {
        for j in i..n {
            let mean = sum[(i, j)] / c;
            let se = ((sum_sq[(i, j)] / c - mean * mean).max(0.0) / c).sqrt();
            let target = if i == j { 1.0 } else { 0.0 };
            if (mean - target).abs() > sigmas * se {
                bad += 1;
            }
        }
    }
    (bad, n * (n + 1) / 2)
}

#[test]
fn monte_carlo_orthonormality() {
    let mut rng = seeded_rng(21);
    let mix = random_mixture(&mut rng, 3, 3);
    let basis = build_basis(&mix, 2, &EpsPolicy::default()).unwrap();
    let points = mix.sample(1_000_000, 22).unwrap();
    let chunks = (0..20).map(|k| {
        basis
            .eval_basis(&points.rows(k * 50_000, 50_000).clone_owned())
            .unwrap()
    });
    let (bad, total) = mc_gram_violations(chunks, basis.len(), 4.0);
    assert_eq!(bad, 0, "{bad} of {total} entries outside 4 SE");
}

#[test]
fn moment_matrix_matches_monte_carlo_gram() {
    let mut rng = seeded_rng(23);
    let mix = random_mixture(&mut rng, 3, 3);
    let basis = build_basis(&mix, 2, &EpsPolicy::default()).unwrap();
    let idx = basis.index_set().indices().to_vec();
    let n = idx.len();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    let total = 10_000_000usize;
    for k in 0..20 {
        let pts = mix.sample(total / 20, 100 + k).unwrap();
        let b = DMatrix::from_fn(pts.nrows(), n, |r, c| {
            monomial(idx[c].exponents(), pts.row(r).clone_owned().as_slice())
        });
        sum += b.tr_mul(&b);
        let sq = b.map(|v| v * v);
        sum_sq += sq.tr_mul(&sq);
    }
    let c = total as f64;
    let m_exact = {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let a: Vec<u32> = idx[i]
                    .exponents()
                    .iter()
                    .zip(idx[j].exponents())
                    .map(|(x, y)| x + y)
                    .collect();
                m[(i, j)] = common::mixture_isserlis(&mix, &a);
            }
        }
        m
    };
    for i in 0..n {
        for j in 0..n {
            let mean = sum[(i, j)] / c;
            let se = ((sum_sq[(i, j)] / c - mean * mean).max(0.0) / c).sqrt();
            assert!((mean - m_exact[(i, j)]).abs() <= 4.0 * se, "entry ({i},{j})");
        }
    }
    let g = basis.whitened_gram(&m_exact).unwrap();
    assert!((g - DMatrix::<f64>::identity(n, n)).norm() < 1e-10);
}

#[test]
fn independent_normals_give_hermite_products() {
    let mix = GaussianMixture::standard_normal(2).unwrap();
    let basis = build_basis(&mix, 2, &EpsPolicy::default()).unwrap();
    let mut rng = seeded_rng(24);
    let s2 = 2f64.sqrt();
    for _ in 0..50 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let psi = basis.eval_basis(&DMatrix::from_row_slice(1, 2, &x)).unwrap();
        let he = |k: u32, t: f64| match k {
            0 => 1.0,
            1 => t,
            _ => (t * t - 1.0) / s2,
        };
        for (c, alpha) in basis.index_set().indices().iter().enumerate() {
            let e = alpha.exponents();
            let want = he(e[0], x[0]) * he(e[1], x[1]);
            assert!((psi[(0, c)].abs() - want.abs()).abs() < 1e-10, "{}", alpha.to_text());
        }
    }
    let points = mix.sample(1_000_000, 25).unwrap();
    let chunks = (0..10).map(|k| {
        basis
            .eval_basis(&points.rows(k * 100_000, 100_000).clone_owned())
            .unwrap()
    });
    let (bad, _) = mc_gram_violations(chunks, basis.len(), 4.0);
    assert_eq!(bad, 0);
}

#[test]
fn gamma_marginal_orthonormal_by_quadrature() {
    let law = Univariate::Gamma { shape: 2.0, scale: 1.0 };
    let groups = ParameterGroups::new(
        1,
        vec![ParameterGroup {
            indices: vec![0],
            law: GroupLaw::Univariate(law),
        }],
    )
    .unwrap();
    let basis = build_grouped_basis(&groups, 2, &EpsPolicy::default()).unwrap();
    let intervals = 40_000;
    let (a, b) = (0.0, 80.0);
    let h = (b - a) / intervals as f64;
    let xs = DMatrix::from_fn(intervals + 1, 1, |i, _| a + h * i as f64);
    let psi = basis.eval_basis(&xs).unwrap();
    let n = basis.len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0
            * xs[(i, 0)]
            * (-xs[(i, 0)]).exp();
        let row = psi.row(i).transpose();
        gram += &row * row.transpose() * w;
    }
    assert!((gram - DMatrix::<f64>::identity(n, n)).amax() < 1e-8);
}

#[test]
fn completeness_of_planted_polynomials() {
    let mut rng = seeded_rng(26);
    for case in 0..10 {
        let d = 2 + case % 3;
        let mix = random_mixture(&mut rng, d, 2);
        let basis = build_basis(&mix, 3, &EpsPolicy::default()).unwrap();
        let c0: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = DVector::from_vec(basis.monomial_to_basis_coefficients(&c0).unwrap());
        let pts = mix.sample(100, case as u64).unwrap();
        let got = basis.eval_basis(&pts).unwrap() * c;
        for r in 0..pts.nrows() {
            let x: Vec<f64> = pts.row(r).iter().copied().collect();
            let want: f64 = basis
                .index_set()
                .indices()
                .iter()
                .zip(&c0)
                .map(|(a, w)| w * monomial(a.exponents(), &x))
                .sum();
            assert!((got[r] - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }
}
