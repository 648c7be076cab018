mod common;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use ttpce::basis::{build_basis, BasisSet, EpsPolicy};
use ttpce::gmm::{seeded_rng, GaussianMixture};
use ttpce::sparse::{best_s_term_tail_l1, cosamp, rip_diagnostic, ErrorBoundConstants, RegressionProblem};

use common::random_mixture;

fn setup(seed: u64) -> (GaussianMixture, BasisSet) {
    let mut rng = seeded_rng(seed);
    let mix = random_mixture(&mut rng, 8, 2);
    let basis = build_basis(&mix, 3, &EpsPolicy::default()).unwrap();
    (mix, basis)
}

fn planted(n: usize, k: usize, seed: u64) -> DVector<f64> {
    let mut rng = seeded_rng(seed);
    let mut c = DVector::zeros(n);
    for j in index::sample(&mut rng, n, k) {
        c[j] = if rng.random::<bool>() { 1.0 } else { -1.0 } * rng.random_range(0.5..1.5);
    }
    c
}

#[test]
fn noiseless_five_sparse_recovery() {
    let (mix, basis) = setup(31);
    let n = basis.len();
    assert_eq!(n, 165);
    let mut recovered = 0;
    for trial in 0..20u64 {
        let truth = planted(n, 5, 1000 + trial);
        let phi = basis.eval_basis(&mix.sample(200, trial).unwrap()).unwrap();
        let y = &phi * &truth;
        let sol = cosamp(&RegressionProblem::new(phi, y, 5, 0.0).unwrap(), 100).unwrap();
        let want: Vec<usize> = (0..n).filter(|&j| truth[j] != 0.0).collect();
        if sol.support == want && (&sol.coefficients - &truth).norm() <= 1e-8 {
            recovered += 1;
        }
    }
    assert!(recovered >= 19, "recovered {recovered}/20");
}

#[test]
fn noisy_error_stays_near_noise_level() {
    let (mix, basis) = setup(32);
    let n = basis.len();
    let truth = planted(n, 5, 7);
    let phi = basis.eval_basis(&mix.sample(200, 8).unwrap()).unwrap();
    let mut rng = seeded_rng(9);
    let e = DVector::from_fn(200, |_, _| rng.random_range(-1.0..1.0));
    let e = &e * (1e-6 / e.norm());
    let y = &phi * &truth + &e;
    let sol = cosamp(&RegressionProblem::new(phi.clone(), y, 5, 0.0).unwrap(), 100).unwrap();
    let err = (&sol.coefficients - &truth).norm();
    assert!(err < 1e-6, "coefficient error {err}");
    let kappa = rip_diagnostic(&phi, 10, 50, 3).unwrap().kappa;
    if let Some(k) = ErrorBoundConstants::new(kappa, 200, 5) {
        assert!(err <= k.bound(best_s_term_tail_l1(truth.as_slice(), 5), 1e-6, 0.0));
    }
}

#[test]
fn rip_estimate_decreases_with_samples() {
    let (mix, basis) = setup(33);
    let median = |m: usize| {
        let mut v: Vec<f64> = (0..20u64)
            .map(|seed| {
                let phi = basis.eval_basis(&mix.sample(m, 500 + seed).unwrap()).unwrap();
                rip_diagnostic(&phi, 5, 20, seed).unwrap().kappa
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v[10]
    };
    let (a, b, c) = (median(50), median(200), median(800));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn large_epsilon_stops_early() {
    let (mix, basis) = setup(34);
    let truth = planted(basis.len(), 8, 3);
    let phi: DMatrix<f64> = basis.eval_basis(&mix.sample(200, 4).unwrap()).unwrap();
    let y = &phi * &truth;
    let eps = 0.5 * y.norm();
    let sol = cosamp(&RegressionProblem::new(phi, y, 8, eps).unwrap(), 100).unwrap();
    assert!(sol.residual_norm <= eps);
    assert!(sol.iterations <= 2);
}
