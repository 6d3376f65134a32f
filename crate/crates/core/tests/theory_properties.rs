//! Risk-minimizer characterizations checked against the simplex oracle.

use dal_core::harness::{random_posterior, random_untied_posterior, synthetic_bound_samples};
use dal_core::losses::LossSpec;
use dal_core::rng;
use dal_core::theory::{
    bound_gap_estimate, excess_zero_one_risk, gce_minimizer_closed_form, minimize_risk_on_simplex, pointwise_risk,
    verify_onehot_minimizer, zero_one_risk, PointwiseRisk,
};
use dal_core::{Error, ProbVector};
use rand::Rng;

#[test]
fn closed_form_agrees_with_oracle() {
    let ks = [2usize, 3, 5, 10];
    for i in 0..200usize {
        let mut r = rng::stream(21, i as u64);
        let k = ks[i % 4];
        let q = 0.1 * (1 + i % 9) as f64;
        let p = random_posterior(&mut r, k);
        let closed = gce_minimizer_closed_form(&p, q).unwrap();
        let risk = PointwiseRisk::new(p.clone(), LossSpec::Gce { q }).unwrap();
        let oracle = minimize_risk_on_simplex(&risk, 1e-10, 100_000).unwrap();
        assert!(closed.linf_distance(&oracle) < 1e-4, "k={k} q={q} p={p:?}");
        let gap = pointwise_risk(&risk, &closed).unwrap() - pointwise_risk(&risk, &oracle).unwrap();
        assert!(gap <= 1e-8, "closed form worse by {gap:e}");
    }
}

#[test]
fn closed_form_sharpens() {
    let mut r = rng::stream(22, 0);
    for i in 0..500 {
        let p = random_posterior(&mut r, 2 + i % 6);
        let q = r.random_range(0.01..0.99);
        let f = gce_minimizer_closed_form(&p, q).unwrap();
        assert!(f.max() > p.max());
        assert_eq!(f.argmax(), p.argmax());
    }
}

#[test]
fn closed_form_limits() {
    let p = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    assert!(gce_minimizer_closed_form(&p, 1e-9).unwrap().linf_distance(&p) < 1e-8);
    let u = ProbVector::uniform(5).unwrap();
    assert!(gce_minimizer_closed_form(&u, 0.8).unwrap().linf_distance(&u) < 1e-15);
    assert!(gce_minimizer_closed_form(&p, 1.0).is_err());
}

#[test]
fn onehot_collapse_for_q_above_one() {
    for i in 0..200u64 {
        let mut r = rng::stream(23, i);
        let k = r.random_range(2..=5);
        let p = random_untied_posterior(&mut r, k);
        let q = 3.0 - 2.0 * r.random::<f64>();
        let lambda = 2.0 - 2.0 * r.random::<f64>();
        let w = verify_onehot_minimizer(&p, q, lambda, 1e-3).unwrap();
        assert!(w.holds, "p={p:?} q={q} lambda={lambda} minimizer={:?}", w.minimizer);
        assert_eq!(w.target_class, p.argmax());
    }
}

#[test]
fn tied_posterior_is_degenerate() {
    let p = ProbVector::new(vec![0.4, 0.4, 0.2]).unwrap();
    assert!(matches!(
        verify_onehot_minimizer(&p, 1.5, 1.0, 1e-3),
        Err(Error::DegenerateInput(_))
    ));
}

#[test]
fn bound_holds_on_synthetic_distributions() {
    for (seed, k) in [(0u64, 2usize), (1, 3), (2, 5), (3, 10)] {
        let mut r = rng::stream(24, seed);
        let samples = synthetic_bound_samples(&mut r, 10_000, k);
        let excess = excess_zero_one_risk(&samples).unwrap();
        let bound = bound_gap_estimate(&samples).unwrap();
        assert!(excess <= bound + 0.02, "k={k}: {excess} > {bound}");
    }
}

#[test]
fn zero_one_risk_counts_mistakes() {
    let outs: Vec<ProbVector> = (0..4).map(|y| ProbVector::one_hot(4, y).unwrap()).collect();
    assert_eq!(zero_one_risk(&outs, &[0, 1, 2, 3]).unwrap(), 0.0);
    assert_eq!(zero_one_risk(&outs, &[1, 2, 3, 0]).unwrap(), 1.0);
    assert_eq!(zero_one_risk(&outs, &[0, 1, 0, 0]).unwrap(), 0.5);
    assert!(zero_one_risk(&outs, &[0]).is_err());
}
