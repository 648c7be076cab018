mod common;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use ttpce::basis::{build_basis, EpsPolicy};
use ttpce::gmm::{seeded_rng, GaussianComponent, GaussianMixture, ParameterGroups};
use ttpce::sampler::{run_adaptive, AdaptiveConfig, CandidatePool, Strategy};
use ttpce::surrogate::{count_modes, kde, Bandwidth, SparseSurrogate, SurrogateMetadata};

use common::random_mixture;

#[test]
fn planted_fit_predicts_fresh_points() {
    let mut rng = seeded_rng(51);
    let mix = random_mixture(&mut rng, 3, 2);
    let basis = build_basis(&mix, 3, &EpsPolicy::default()).unwrap();
    let n = basis.len();
    let mut truth = DVector::zeros(n);
    for j in index::sample(&mut rng, n, 4) {
        truth[j] = rng.random_range(-1.5..1.5);
    }
    let law = ParameterGroups::single(mix.clone());
    let pool = CandidatePool::sample(&basis, &law, 400, 52).unwrap();
    let b = basis.clone();
    let t = truth.clone();
    let mut oracle = move |x: &[f64]| Ok((b.eval_basis(&DMatrix::from_row_slice(1, x.len(), x))? * &t)[0]);
    let config = AdaptiveConfig {
        initial: 20,
        max_samples: 40,
        strategy: Strategy::Hybrid,
        ..AdaptiveConfig::default()
    };
    let run = run_adaptive(&pool, &config, &mut oracle).unwrap();
    let model = SparseSurrogate::from_run(basis.clone(), &run, Some("hybrid")).unwrap();
    let fresh = mix.sample(1000, 53).unwrap();
    let want = basis.eval_basis(&fresh).unwrap() * &truth;
    let got = model.predict(&fresh).unwrap();
    assert!((&got - &want).norm() <= 1e-8 * want.norm());
}

#[test]
fn closed_form_statistics_match_monte_carlo() {
    let mut rng = seeded_rng(54);
    for k in 0..3u64 {
        let mix = random_mixture(&mut rng, 3, 3);
        let basis = build_basis(&mix, 2, &EpsPolicy::default()).unwrap();
        let c = DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0));
        let meta = SurrogateMetadata {
            d: 3,
            p: 2,
            s: basis.len(),
            epsilon: 0.0,
            strategy: None,
            m_used: 0,
        };
        let model = SparseSurrogate::new(basis, c, meta).unwrap();
        let stats = model.stats();
        let y = model
            .sample_outputs(&ParameterGroups::single(mix), 1_000_000, 60 + k)
            .unwrap();
        let count = y.len() as f64;
        let mean = y.mean();
        let centred = y.map(|v| v - mean);
        let var = centred.map(|v| v * v).sum() / (count - 1.0);
        let m4 = centred.map(|v| v.powi(4)).sum() / count;
        assert!((mean - stats.mean).abs() <= 4.0 * (var / count).sqrt());
        assert!((var - stats.variance).abs() <= 4.0 * ((m4 - var * var) / count).sqrt());
    }
}

#[test]
fn identity_model_on_two_component_law_is_bimodal() {
    let comp = |m: f64| GaussianComponent::new(DVector::from_vec(vec![m]), DMatrix::from_element(1, 1, 0.25)).unwrap();
    let mix = GaussianMixture::new(vec![0.5, 0.5], vec![comp(-2.0), comp(2.0)]).unwrap();
    let basis = build_basis(&mix, 1, &EpsPolicy::default()).unwrap();
    let c = DVector::from_vec(basis.monomial_to_basis_coefficients(&[0.0, 1.0]).unwrap());
    let meta = SurrogateMetadata {
        d: 1,
        p: 1,
        s: 2,
        epsilon: 0.0,
        strategy: None,
        m_used: 0,
    };
    let model = SparseSurrogate::new(basis, c, meta).unwrap();
    let y = model.sample_outputs(&ParameterGroups::single(mix), 20_000, 61).unwrap();
    let est = kde(y.as_slice(), Bandwidth::Silverman).unwrap();
    assert_eq!(count_modes(&est.density), 2);
    assert!((est.integral() - 1.0).abs() < 1e-3);
}
