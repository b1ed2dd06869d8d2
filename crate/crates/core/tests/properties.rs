mod common;

use boostbif_core::averaged::*;
use boostbif_core::{ControlScheme, ConverterParams};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

fn pvmc(v_s: f64, l: f64, c: f64, r_load: f64, r: f64, k_p: f64) -> ConverterParams {
    ConverterParams::new(v_s, l, c, r_load, r, 0.0, 1.0, 100e3, ControlScheme::Pvmc { k_p }).unwrap()
}

fn stages(p: &ConverterParams) -> (Matrix2<f64>, Matrix2<f64>, Vector2<f64>) {
    let a1 = Matrix2::new(-p.r / p.l, 0.0, 0.0, -1.0 / (p.r_load * p.c));
    let a2 = Matrix2::new(-p.r / p.l, -1.0 / p.l, 1.0 / p.c, -1.0 / (p.r_load * p.c));
    (a1, a2, Vector2::new(1.0 / p.l, 0.0))
}

/// Steady state `-A(D)^{-1} B v_s` of the averaged power stage by dense solve.
fn dense_steady_state(p: &ConverterParams, d: f64) -> Vector2<f64> {
    let (a1, a2, b) = stages(p);
    let a = a1 * d + a2 * (1.0 - d);
    -a.lu().solve(&(b * p.v_s)).unwrap()
}

/// Closed-loop Jacobian of the averaged PVMC loop with `d = κ(v_r - v_C)`; returns
/// `(-trace, det)`, the coefficients `(c_1, c_0)`, with the magnitude of the terms.
fn jacobian_coeffs(p: &ConverterParams, d: f64) -> (f64, f64, f64, f64) {
    let (a1, a2, _) = stages(p);
    let x = dense_steady_state(p, d);
    let kappa = p.kappa().unwrap();
    let bx = (a1 - a2) * x;
    let j = a1 * d + a2 * (1.0 - d) + Matrix2::new(0.0, -kappa * bx[0], 0.0, -kappa * bx[1]);
    let c1_scale = j[(0, 0)].abs() + j[(1, 1)].abs();
    let c0_scale = (j[(0, 0)] * j[(1, 1)]).abs() + (j[(0, 1)] * j[(1, 0)]).abs();
    (-j.trace(), j.determinant(), c1_scale, c0_scale)
}

fn params_strategy() -> impl Strategy<Value = ConverterParams> {
    (1.0..50.0f64, 1e-6..1e-3f64, 1e-5..1e-2f64, 1.0..100.0f64, 0.0..2.0f64, 0.1..10.0f64)
        .prop_map(|(v_s, l, c, r_load, r, k_p)| pvmc(v_s, l, c, r_load, r, k_p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn steady_state_matches_dense_solve(p in params_strategy(), d in 0.0..0.99f64) {
        let (i_l, v_c) = averaged_steady_state(&p, d).unwrap();
        let x = dense_steady_state(&p, d);
        prop_assert!((i_l - x[0]).abs() <= 1e-9 * x[0].abs().max(1e-300));
        prop_assert!((v_c - x[1]).abs() <= 1e-9 * x[1].abs().max(1e-300));
    }

    #[test]
    fn coefficients_match_jacobian(p in params_strategy(), d in 0.0..0.99f64) {
        let (c1, c0) = characteristic_coeffs(&p, d).unwrap();
        let (j1, j0, s1, s0) = jacobian_coeffs(&p, d);
        prop_assert!((c1 - j1).abs() <= 1e-9 * s1);
        prop_assert!((c0 - j0).abs() <= 1e-9 * s0);
    }

    #[test]
    fn v_c_peaks_at_one_minus_sqrt_eta(p in params_strategy().prop_filter("r > 0", |p| p.r > 1e-3 && p.eta() < 0.5)) {
        let d = 1.0 - p.eta().sqrt();
        // step scaled to the peak width √η
        let h = 1e-4 * p.eta().sqrt();
        let v = |d: f64| averaged_steady_state(&p, d).unwrap().1;
        let slope = (v(d + h) - v(d - h)) / (2.0 * h);
        prop_assert!(slope.abs() <= 1e-6 * p.v_s / p.eta().sqrt(), "slope {slope}");
        // and it is the maximum
        prop_assert!(v(d) >= v(d + 1e-3) && v(d) >= v(d - 1e-3));
    }

    #[test]
    fn critical_duties_are_coefficient_roots(p in params_strategy().prop_filter("r > 0", |p| p.r > 1e-3)) {
        if let Ok(ds) = snb_duty(&p) {
            if ds > 0.0 && ds < 1.0 {
                let (_, j0, _, s0) = jacobian_coeffs(&p, ds);
                prop_assert!(j0.abs() <= 1e-9 * s0, "c0(D_S) = {j0}, scale {s0}");
            }
        }
        if let Some(dh) = hopf_duty(&p).unwrap() {
            if dh > 0.0 && dh < 1.0 {
                let (j1, _, s1, _) = jacobian_coeffs(&p, dh);
                prop_assert!(j1.abs() <= 1e-9 * s1, "c1(D_H) = {j1}, scale {s1}");
            }
        }
    }

    #[test]
    fn duty_round_trip(p in params_strategy(), d in 0.01..0.98f64) {
        let v = vr_of_duty(&p, d).unwrap();
        let sols = duty_solutions(&p, v).unwrap();
        prop_assert!(sols.iter().any(|s| (s - d).abs() <= 1e-6), "{d} not in {sols:?}");
    }

    #[test]
    fn duty_round_trip_other_schemes(d in 0.01..0.98f64, k_p in 0.5..5.0f64, r in 0.01..0.5f64) {
        let cmc = common::ex1().with_r(r).with_scheme(ControlScheme::CmcClosedLoop { k_p });
        let t3 = common::ex2().with_r(r);
        for p in [cmc, t3] {
            let v = vr_of_duty(&p, d).unwrap();
            let sols = duty_solutions(&p, v).unwrap();
            prop_assert!(sols.iter().any(|s| (s - d).abs() <= 1e-6), "{d} not in {sols:?}");
        }
    }

    #[test]
    fn zero_resistance_excludes_saddle_node(p in params_strategy(), v_r in 0.0..200.0f64) {
        let p = p.with_r(0.0);
        prop_assert!(duty_solutions(&p, v_r).unwrap().len() <= 1);
        let cmc = p.with_scheme(ControlScheme::CmcClosedLoop { k_p: 2.0 });
        prop_assert!(duty_solutions(&cmc, v_r).unwrap().len() <= 1);
        for k in 0..2000 {
            let d = 0.999 * k as f64 / 1999.0;
            prop_assert!(characteristic_coeffs(&p, d).unwrap().1 > 0.0);
        }
    }

    #[test]
    fn routh_table(c1 in -1e6..1e6f64, c0 in -1e12..1e12f64) {
        let class = classify_coeffs(c1, c0);
        // independent root computation by the plain quadratic formula
        let disc = c1 * c1 - 4.0 * c0;
        let re = if disc >= 0.0 {
            [0.5 * (-c1 + disc.sqrt()), 0.5 * (-c1 - disc.sqrt())]
        } else {
            [-0.5 * c1, -0.5 * c1]
        };
        let unstable = re.iter().filter(|&&x| x > 0.0).count();
        let expect = match unstable {
            0 if re.iter().all(|&x| x < 0.0) => PoleClass::Stable,
            1 => PoleClass::OneUnstable,
            2 => PoleClass::TwoUnstable,
            _ => PoleClass::Marginal,
        };
        prop_assert_eq!(class, expect);
        let roots = quadratic_roots(c1, c0);
        prop_assert!(roots[0].re >= roots[1].re);
    }
}

#[test]
fn open_loop_peak_current_is_increasing() {
    let p = common::ex3().with_scheme(ControlScheme::CmcOpenLoop);
    let mut prev = f64::NEG_INFINITY;
    for k in 0..2000 {
        let d = 0.999 * k as f64 / 1999.0;
        let i = peak_current(&p, d).unwrap();
        assert!(i > prev, "D = {d}");
        prev = i;
    }
}

#[test]
fn critical_mode_excludes_snb_for_ex1() {
    let p = common::ex1();
    for k in 1..100 {
        let d = k as f64 / 100.0;
        let cm = critical_mode_check(&p, d).unwrap();
        assert!(cm.snb_excluded && cm.k_star > cm.k_crit);
        let t = p.period();
        assert!((cm.k - 2.0 * p.l / (p.r_load * t)).abs() < 1e-12);
        assert!((cm.k_crit - d * (1.0 - d).powi(2)).abs() < 1e-15);
    }
}
