use std::f64::consts::TAU;

use proptest::prelude::*;
use torus_lab::geometry::{intrinsic_distance, TorusPoint};
use torus_lab::heat::{heat_apply, poisson_apply};
use torus_lab::lipschitz::lambda_seminorm;
use torus_lab::random::{random_field, DecayProfile};
use torus_lab::riesz::{riesz_first, riesz_second, riesz_tail, riesz_vector_norm};
use torus_lab::{SpectralField, Torus, WeightModel};

fn torus3() -> Torus {
    Torus::new(WeightModel::explicit(vec![1.0, 2.0, 4.0]).unwrap(), vec![4, 3, 2]).unwrap()
}

fn field(t: &Torus, seed: u64) -> SpectralField {
    random_field(t.lattice(), seed, DecayProfile::Polynomial(1.5), true)
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..TAU
}

fn point(d: usize) -> impl Strategy<Value = TorusPoint> {
    prop::collection::vec(angle(), d).prop_map(TorusPoint::new)
}

fn close(a: &SpectralField, b: &SpectralField, tol: f64) -> bool {
    a.max_difference(b).unwrap() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_a_metric(x in point(3), y in point(3), z in point(3)) {
        let w = WeightModel::explicit(vec![1.0, 2.0, 4.0]).unwrap();
        let d = |a: &TorusPoint, b: &TorusPoint| intrinsic_distance(a, b, &w).unwrap();
        prop_assert!(d(&x, &x) < 1e-15);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        // invariant under translating both points
        prop_assert!((d(&x.add(&z), &y.add(&z)) - d(&x, &y)).abs() < 1e-9);
    }

    #[test]
    fn distance_scales_with_weights(x in point(3), c in 0.1f64..10.0) {
        let w = WeightModel::explicit(vec![1.0, 2.0, 4.0]).unwrap();
        let e = TorusPoint::identity(3);
        let d = intrinsic_distance(&e, &x, &w).unwrap();
        let dc = intrinsic_distance(&e, &x, &w.scaled(c).unwrap()).unwrap();
        prop_assert!((dc * c.sqrt() - d).abs() < 1e-10 * d.max(1.0));
    }

    #[test]
    fn matrix_distance_is_a_metric(x in point(2), y in point(2), z in point(2)) {
        let w = WeightModel::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let d = |a: &TorusPoint, b: &TorusPoint| intrinsic_distance(a, b, &w).unwrap();
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        prop_assert!((d(&x.add(&z), &y.add(&z)) - d(&x, &y)).abs() < 1e-9);
    }

    #[test]
    fn gradient_riesz_vector_is_isometric(seed in 0u64..10_000) {
        let t = torus3();
        let f = field(&t, seed);
        let lhs = riesz_vector_norm(&t, &f, 2.0).unwrap();
        prop_assert!((lhs - f.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn riesz_squares_sum_to_minus_identity(seed in 0u64..10_000) {
        let t = torus3();
        let f = field(&t, seed);
        let mut sum = t.zeros();
        for j in 0..3 {
            sum = sum.add(&riesz_second(&t, &f, j, j).unwrap()).unwrap();
        }
        prop_assert!(close(&sum, &f.scale(-1.0), 1e-13));
    }

    #[test]
    fn riesz_commutes_with_heat(seed in 0u64..10_000, time in 1e-3f64..5.0, i in 0usize..3) {
        let t = torus3();
        let f = field(&t, seed);
        let a = heat_apply(&t, &riesz_first(&t, &f, i).unwrap(), time).unwrap();
        let b = riesz_first(&t, &heat_apply(&t, &f, time).unwrap(), i).unwrap();
        prop_assert!(close(&a, &b, 1e-14));
    }

    #[test]
    fn semigroups_commute_with_translation(seed in 0u64..10_000, z in prop::collection::vec(angle(), 3), time in 1e-3f64..5.0) {
        let t = torus3();
        let f = field(&t, seed);
        let a = heat_apply(&t, &f.translate(&z), time).unwrap();
        let b = heat_apply(&t, &f, time).unwrap().translate(&z);
        prop_assert!(close(&a, &b, 1e-13));
        let a = poisson_apply(&t, &f.translate(&z), time).unwrap();
        let b = poisson_apply(&t, &f, time).unwrap().translate(&z);
        prop_assert!(close(&a, &b, 1e-13));
    }

    #[test]
    fn heat_semigroup_law(seed in 0u64..10_000, s in 1e-3f64..2.0, u in 1e-3f64..2.0) {
        let t = torus3();
        let f = field(&t, seed);
        let a = heat_apply(&t, &heat_apply(&t, &f, s).unwrap(), u).unwrap();
        let b = heat_apply(&t, &f, s + u).unwrap();
        prop_assert!(close(&a, &b, 1e-13));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn seminorm_is_homogeneous_and_translation_invariant(
        seed in 0u64..10_000,
        c in -5.0f64..5.0,
        z in prop::collection::vec(angle(), 2),
    ) {
        let t = Torus::new(WeightModel::explicit(vec![1.0, 4.0]).unwrap(), vec![4, 4]).unwrap();
        let f = random_field(t.lattice(), seed, DecayProfile::Polynomial(2.0), true);
        let base = lambda_seminorm(&t, &f, 0.5, 1, 2.0).unwrap().value;
        let scaled = lambda_seminorm(&t, &f.scale(c), 0.5, 1, 2.0).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * base.max(1e-300));
        let moved = lambda_seminorm(&t, &f.translate(&z), 0.5, 1, 2.0).unwrap().value;
        prop_assert!((moved - base).abs() <= 1e-9 * base);
    }

    #[test]
    fn riesz_tails_do_not_increase(seed in 0u64..10_000) {
        let t = Torus::with_default_bandwidths(WeightModel::power(0.5, 5).unwrap(), 3).unwrap();
        let f = random_field(t.lattice(), seed, DecayProfile::Polynomial(2.0), true);
        let tails: Vec<f64> = (0..5).map(|m| riesz_tail(&t, &f, m, 4, 2.0).unwrap()).collect();
        for pair in tails.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-14);
        }
    }
}
