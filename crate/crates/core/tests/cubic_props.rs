use arcdim_core::cubic_family::{fixed_point_near_2, gamma_curve, gamma_solve, GAMMA_TOL};
use arcdim_core::{ComplexPoint, DynSetup, Polynomial};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn curve_points_send_zero_to_the_fixed_point(eps in 0.0f64..0.15) {
        let pt = gamma_solve(eps, GAMMA_TOL).unwrap();
        let f = Polynomial::cubic_family(eps, pt.beta).unwrap();
        let zero = ComplexPoint::new(0.0, 0.0);
        // Direct iteration as the oracle.
        let two = f.eval(f.eval(zero));
        prop_assert!((two.re - pt.p).abs() < 1e-11);
        prop_assert!((f.eval(ComplexPoint::new(pt.p, 0.0)).re - pt.p).abs() < 1e-12);
        let (_, d) = f.eval_with_derivative(ComplexPoint::new(pt.p, 0.0));
        prop_assert!(d.norm() > 1.0);
    }

    #[test]
    fn fixed_point_is_repelling(eps in 0.0f64..0.15, beta in 1.8f64..2.3) {
        let p = fixed_point_near_2(eps, beta).unwrap();
        let f = Polynomial::cubic_family(eps, beta).unwrap();
        let (v, d) = f.eval_with_derivative(ComplexPoint::new(p, 0.0));
        prop_assert!((v.re - p).abs() < 1e-11);
        prop_assert!(d.re > 1.0);
    }
}

#[test]
fn curve_is_increasing_and_starts_at_two() {
    let pts = gamma_curve(0.0, 0.145, 0.005, GAMMA_TOL).unwrap();
    assert_eq!(pts[0].beta, 2.0);
    assert!(pts.windows(2).all(|w| w[1].beta > w[0].beta));
    assert!(pts.iter().all(|p| p.residual < 1e-11));
}

#[test]
fn curve_points_have_escaping_free_critical_point() {
    for eps in [0.02, 0.08, 0.14] {
        let pt = gamma_solve(eps, GAMMA_TOL).unwrap();
        let setup = DynSetup::new(pt.polynomial().unwrap()).unwrap();
        let c = ComplexPoint::new(pt.escaping_critical_point(), 0.0);
        assert!(!arcdim_core::escape::classify(&setup, c).is_bounded());
    }
}
