mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ttpce::gmm::{seeded_rng, GaussianComponent, GaussianMixture};
use ttpce::indexing::{MultiIndex, MultiIndexSet};
use ttpce::moments::{mixture_moment, moment_table};

use common::{mixture_isserlis, random_mixture, rel};

#[test]
fn correlated_pair() {
    let c = GaussianComponent::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
    let mix = GaussianMixture::new(vec![1.0], vec![c]).unwrap();
    let v = mixture_moment(&mix, &MultiIndex::new(vec![1, 1])).unwrap();
    assert!((v - 0.5).abs() < 1e-14);
}

#[test]
fn sixth_order_with_mean_in_three_dimensions() {
    let mut rng = seeded_rng(11);
    for _ in 0..10 {
        let mix = random_mixture(&mut rng, 3, 1);
        let mut e = vec![0u32; 3];
        for _ in 0..6 {
            e[rng.random_range(0..3)] += 1;
        }
        let got = mixture_moment(&mix, &MultiIndex::new(e.clone())).unwrap();
        let want = mixture_isserlis(&mix, &e);
        assert!(rel(got, want) < 1e-9, "{e:?}: {got} vs {want}");
    }
}

#[test]
fn one_dimensional_mixture_by_hand() {
    let comp = |m: f64| GaussianComponent::new(DVector::from_vec(vec![m]), DMatrix::identity(1, 1)).unwrap();
    let mix = GaussianMixture::new(vec![0.5, 0.5], vec![comp(0.0), comp(1.0)]).unwrap();
    assert!((mixture_moment(&mix, &MultiIndex::new(vec![1])).unwrap() - 0.5).abs() < 1e-14);
    assert!((mixture_moment(&mix, &MultiIndex::new(vec![2])).unwrap() - 1.5).abs() < 1e-14);
}

#[test]
fn table_entries_match_oracle() {
    let mut rng = seeded_rng(12);
    let mix = random_mixture(&mut rng, 4, 3);
    let table = moment_table(&mix, 2).unwrap();
    let all = MultiIndexSet::enumerate(4, 4).unwrap();
    for alpha in all.indices() {
        let got = table.get(alpha).unwrap();
        let want = mixture_isserlis(&mix, alpha.exponents());
        assert!(rel(got, want) < 1e-9, "{}: {got} vs {want}", alpha.to_text());
    }
}

#[test]
fn random_cases_up_to_sixth_order() {
    let mut rng = seeded_rng(13);
    for _ in 0..200 {
        let d = rng.random_range(1..=4);
        let r = rng.random_range(1..=3);
        let mix = random_mixture(&mut rng, d, r);
        let mut e = vec![0u32; d];
        for _ in 0..rng.random_range(0..=6) {
            e[rng.random_range(0..d)] += 1;
        }
        let got = mixture_moment(&mix, &MultiIndex::new(e.clone())).unwrap();
        let want = mixture_isserlis(&mix, &e);
        assert!(rel(got, want) < 1e-9, "{e:?}: {got} vs {want}");
    }
}
