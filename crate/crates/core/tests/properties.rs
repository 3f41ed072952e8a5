//! Randomized invariants over the parameter space.

use proptest::prelude::*;
use tl_bethe_core::bethe::{self, one_magnon_roots};
use tl_bethe_core::lax;
use tl_bethe_core::model::{build_x, derive_q, tl_constant};
use tl_bethe_core::residual;
use tl_bethe_core::sampling::{min_guard, Sampler};
use tl_bethe_core::{c64, Branch, CoefficientContext, ModelParams, RapiditySet, Side, C64};

/// Polar coordinates keep samples inside an annulus around the unit circle.
fn point(lo: f64, hi: f64) -> impl Strategy<Value = C64> {
    (lo..hi, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn big_q() -> impl Strategy<Value = C64> {
    point(0.6, 1.8).prop_filter("away from the double root", |&q| derive_q(q, Branch::Plus).is_ok())
}

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![Just(Branch::Plus), Just(Branch::Minus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn branches_are_reciprocal(q in big_q()) {
        let plus = derive_q(q, Branch::Plus).unwrap();
        let minus = derive_q(q, Branch::Minus).unwrap();
        prop_assert!((plus * minus - c64(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(plus.norm() >= minus.norm() * (1.0 - 1e-12));
        prop_assert!(residual::scalar(tl_constant(q), -(plus + plus.inv())) < 1e-12);
    }

    #[test]
    fn generator_is_a_rank_one_projector_up_to_the_loop_weight(q in big_q(), b in branch()) {
        let p = ModelParams::new(2, q, b).unwrap();
        let x = build_x(&p);
        prop_assert!(residual::matrix(&(&x * &x), &(&x * p.c())) < 1e-12);
        prop_assert!(residual::matrix(&x, &x.transpose()) < 1e-15);
        prop_assert!(residual::scalar(x.trace(), p.c()) < 1e-13);
    }

    #[test]
    fn yang_baxter_and_unitarity_hold(q in big_q(), b in branch(), u in point(0.5, 2.0), v in point(0.5, 2.0)) {
        let p = ModelParams::new(2, q, b).unwrap();
        prop_assume!(min_guard(&[u, v], p.q()) > 1e-3);
        prop_assert!(lax::check_yang_baxter(u, v, &p).unwrap() < 1e-10);
        prop_assert!(lax::check_unitarity(u, &p).unwrap() < 1e-11);
    }

    #[test]
    fn eigenvalue_is_symmetric_and_even(seed in any::<u64>(), b in branch()) {
        let p = ModelParams::new(3, c64(1.1, 0.2), b).unwrap();
        let ctx = CoefficientContext::new(p);
        let pts = Sampler::new(seed).regular_points(4, &[], p.q());
        let (u, ubar) = (pts[0], &pts[1..]);
        let base = bethe::eigenvalue(u, ubar, &ctx).unwrap();
        let permuted = [ubar[2], ubar[0], ubar[1]];
        let flipped = [ubar[0], -ubar[1], ubar[2]];
        prop_assert!(residual::scalar(base, bethe::eigenvalue(u, &permuted, &ctx).unwrap()) < 1e-11);
        prop_assert!(residual::scalar(base, bethe::eigenvalue(u, &flipped, &ctx).unwrap()) < 1e-11);
    }

    #[test]
    fn offshell_equation_on_random_rapidities(seed in any::<u64>(), m in 0usize..=2, b in branch()) {
        let p = ModelParams::new(2, c64(0.9, -0.3), b).unwrap();
        let pts = Sampler::new(seed).regular_points(m + 1, &[], p.q());
        let ubar = RapiditySet::new(pts[1..].to_vec(), &p).unwrap();
        for side in [Side::Right, Side::Left] {
            prop_assert!(bethe::offshell_residual(pts[0], &ubar, &p, side).unwrap() < 1e-10);
        }
    }

    #[test]
    fn closed_form_roots_are_on_shell(q in big_q(), b in branch(), n in 2usize..=5) {
        let p = ModelParams::new(n, q, b).unwrap();
        let ctx = CoefficientContext::new(p);
        for u in one_magnon_roots(&p) {
            prop_assume!(RapiditySet::new(vec![u], &p).is_ok());
            prop_assert!(bethe::normalized_residuals(&[u], &ctx).unwrap()[0] < 1e-10);
        }
    }

    #[test]
    fn sampler_is_reproducible_and_regular(seed in any::<u64>()) {
        let q = c64(-2.66, 0.0);
        let a = Sampler::new(seed).regular_points(3, &[], q);
        let b = Sampler::new(seed).regular_points(3, &[], q);
        prop_assert_eq!(&a, &b);
        prop_assert!(min_guard(&a, q) > 1e-3);
        for z in &a {
            prop_assert!((0.5..=2.0).contains(&z.norm()));
        }
    }

    #[test]
    fn residuals_are_symmetric_and_scale_free_above_unit_magnitude(a in point(1.0, 10.0), b in point(1.0, 10.0), s in 1.0f64..1e6) {
        prop_assert_eq!(residual::scalar(a, b), residual::scalar(b, a));
        prop_assert_eq!(residual::scalar(a, a), 0.0);
        let (sa, sb) = (a * s, b * s);
        prop_assert!((residual::scalar(sa, sb) - residual::scalar(a, b)).abs() < 1e-12);
        // Below unit magnitude the floor turns it into an absolute error.
        let tiny = a / (s * 10.0);
        prop_assert!((residual::scalar(tiny, C64::new(0.0, 0.0)) - tiny.norm()).abs() < 1e-15);
    }
}
