#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ttpce::gmm::{GaussianComponent, GaussianMixture, Rng64};

pub fn random_mixture(rng: &mut Rng64, d: usize, components: usize) -> GaussianMixture {
    let mut weights: Vec<f64> = (0..components).map(|_| 0.2 + rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let comps = (0..components)
        .map(|_| {
            let mean = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let cov = (&a * a.transpose()) / d as f64 + DMatrix::identity(d, d) * 0.2;
            GaussianComponent::new(mean, cov).unwrap()
        })
        .collect();
    GaussianMixture::new(weights, comps).unwrap()
}

fn pairings(cov: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    (1..idx.len())
        .map(|j| {
            let rest: Vec<usize> = idx[1..]
                .iter()
                .enumerate()
                .filter(|(k, _)| k + 1 != j)
                .map(|(_, &v)| v)
                .collect();
            cov[(idx[0], idx[j])] * pairings(cov, &rest)
        })
        .sum()
}

/// Gaussian moment by expanding `ξ = μ + z` and summing Isserlis pairings
/// of every centred sub-product.
pub fn gaussian_isserlis(mean: &DVector<f64>, cov: &DMatrix<f64>, alpha: &[u32]) -> f64 {
    let factors: Vec<usize> = alpha
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
        .collect();
    let k = factors.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << k) {
        let centred: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| factors[b]).collect();
        let mu: f64 = (0..k)
            .filter(|b| mask >> b & 1 == 0)
            .map(|b| mean[factors[b]])
            .product();
        total += mu * pairings(cov, &centred);
    }
    total
}

pub fn mixture_isserlis(mix: &GaussianMixture, alpha: &[u32]) -> f64 {
    mix.weights()
        .iter()
        .zip(mix.components())
        .map(|(w, c)| w * gaussian_isserlis(c.mean(), c.covariance(), alpha))
        .sum()
}

pub fn monomial(alpha: &[u32], x: &[f64]) -> f64 {
    alpha.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
