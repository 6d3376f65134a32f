//! Invariants of the loss family over random inputs.

use dal_core::losses::{dal_loss, gce_coefficient, loss_value, tce_coefficient, weight_curve, LossSpec};
use dal_core::ProbVector;
use proptest::prelude::*;

fn prob_vector(k: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|w| ProbVector::normalized(w).unwrap())
}

fn any_spec() -> impl Strategy<Value = LossSpec> {
    prop_oneof![
        Just(LossSpec::Ce),
        Just(LossSpec::Mae),
        Just(LossSpec::Bs),
        (0.05f64..3.0).prop_map(|q| LossSpec::Gce { q }),
        (1u32..25).prop_map(|t| LossSpec::Tce { t }),
        (0.01f64..0.99).prop_map(|pi1| LossSpec::Js { pi1 }),
        (0.05f64..3.0, 0.0f64..2.0).prop_map(|(q, lambda)| LossSpec::Dal { q, lambda }),
    ]
}

proptest! {
    #[test]
    fn losses_are_finite_and_nonnegative(spec in any_spec(), f in (2usize..8).prop_flat_map(prob_vector), y in 0usize..8) {
        let y = y % f.k();
        let v = loss_value(&spec, &f, y).unwrap();
        prop_assert!(v.is_finite() && v >= 0.0, "{spec} -> {v}");
    }

    #[test]
    fn spec_strings_round_trip(spec in any_spec()) {
        let back: LossSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn correct_one_hot_has_zero_loss(k in 2usize..8, y in 0usize..8) {
        let y = y % k;
        let f = ProbVector::one_hot(k, y).unwrap();
        for spec in [LossSpec::Ce, LossSpec::Mae, LossSpec::Gce { q: 0.4 }, LossSpec::Tce { t: 5 }, LossSpec::Js { pi1: 0.5 }] {
            prop_assert!(loss_value(&spec, &f, y).unwrap().abs() < 1e-9, "{}", spec);
        }
    }

    #[test]
    fn losses_fall_as_f_y_rises(a in 0.01f64..0.98, b in 0.01f64..0.98) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let two = |fy: f64| ProbVector::new(vec![fy, 1.0 - fy]).unwrap();
        for spec in [LossSpec::Ce, LossSpec::Mae, LossSpec::Gce { q: 0.7 }, LossSpec::Tce { t: 4 }, LossSpec::Js { pi1: 0.3 }] {
            prop_assert!(loss_value(&spec, &two(hi), 0).unwrap() < loss_value(&spec, &two(lo), 0).unwrap());
        }
    }

    #[test]
    fn gce_weight_direction_follows_q(fy in 0.01f64..0.99, q in 0.05f64..3.0) {
        let c = gce_coefficient(q, fy);
        if q < 1.0 { prop_assert!(c > 1.0); }
        if q > 1.0 { prop_assert!(c < 1.0); }
    }

    #[test]
    fn tce_weight_grows_with_order(fy in 0.01f64..0.99, t in 1u32..30) {
        prop_assert!(tce_coefficient(t + 1, fy) >= tce_coefficient(t, fy));
        if fy < 0.5 {
            prop_assert!(tce_coefficient(t + 1, fy) > tce_coefficient(t, fy));
        }
        prop_assert!(tce_coefficient(t, fy) <= 1.0 / fy + 1e-9);
    }

    #[test]
    fn dal_is_gce_plus_scaled_bootstrap(f in prob_vector(4), y in 0usize..4, q in 0.1f64..2.0, lambda in 0.0f64..2.0) {
        let gce = loss_value(&LossSpec::Gce { q }, &f, y).unwrap();
        let bs = loss_value(&LossSpec::Bs, &f, y).unwrap();
        let expected = gce + lambda / (q * 4f64.ln()) * bs;
        prop_assert!((dal_loss(&f, y, q, lambda, 4).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn gce_endpoints() {
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    for &fy in &grid {
        let f = ProbVector::new(vec![fy, 1.0 - fy]).unwrap();
        let ce = loss_value(&LossSpec::Ce, &f, 0).unwrap();
        let near = loss_value(&LossSpec::Gce { q: 1e-8 }, &f, 0).unwrap();
        assert!((ce - near).abs() < 1e-6, "f_y = {fy}");
        assert_eq!(
            loss_value(&LossSpec::Gce { q: 1.0 }, &f, 0).unwrap(),
            loss_value(&LossSpec::Mae, &f, 0).unwrap()
        );
    }
    assert_eq!(
        weight_curve(&LossSpec::Gce { q: 1.0 }, &grid).unwrap(),
        vec![1.0; grid.len()]
    );
}
