use super::*;
use crate::model::catalog::{self, CatalogParams};
use crate::model::DomainBox;
use crate::poly::{Poly, ScalarMap};
use proptest::prelude::*;
use std::f64::consts::PI;

fn cat(name: &str, k: f64, l: f64, tau: f64) -> ModelSpec {
    let p = CatalogParams { k: Some(k), l: Some(l), ..Default::default() };
    catalog::build(name, &p).unwrap().with_params(1.0, 1.0, tau)
}

fn model_ii(k: f64, l1: f64, l2: f64, tau: f64) -> ModelSpec {
    let p = CatalogParams { k: Some(k), l1: Some(l1), l2: Some(l2), ..Default::default() };
    catalog::build("ex-13-6-34-ii", &p).unwrap().with_params(1.0, 1.0, tau)
}

/// Vertical field, `x′`-dependent intensity and a non-trivial metric along
/// the fiber.
fn curved_model() -> ModelSpec {
    let vecpot = [
        ScalarMap::poly(Poly::linear(1, -0.5)),
        ScalarMap::poly(Poly::linear(0, 0.5)),
        ScalarMap::zero(),
    ];
    let v = Poly::new([(1.0, [0, 0, 2]), (0.3, [2, 0, 0]), (0.2, [1, 1, 0]), (0.4, [0, 0, 1])]);
    let mut m = ModelSpec::euclidean(
        "curved",
        3,
        vecpot,
        ScalarMap::poly(v),
        DomainBox::new([-1.0, -1.0, -3.0], [1.0, 1.0, 3.0]),
    )
    .with_params(1.0, 1.0, 1.0);
    m.metric[0][0] = ScalarMap::poly(Poly::new([(1.0, [0, 0, 0]), (0.1, [2, 0, 0])]));
    m.metric[2][2] = ScalarMap::poly(Poly::new([(1.0, [0, 0, 0]), (0.25, [0, 0, 2])]));
    m
}

#[test]
fn linear_model_closed_forms() {
    let (k, l, tau) = (1.5, 0.7, 1.0);
    let m = cat("ex-13-6-34-i", k, l, tau);
    for &(x1, r) in &[(0.0, 0.0), (-0.5, 0.3), (0.4, 0.1)] {
        let xp = [x1, 0.3];
        let a = tau - l * x1 - r;
        let td = turning_points(&m, xp, r).unwrap();
        assert!(td.z0.abs() < 1e-7);
        assert!((td.rbar - (tau - l * x1)).abs() < 1e-12);
        assert!((td.zplus - a.sqrt() / k).abs() < 1e-10);
        assert!((td.zminus + a.sqrt() / k).abs() < 1e-10);
        let e = eta(&m, xp, r).unwrap();
        let exact = PI * a / (2.0 * k);
        assert!((e - exact).abs() <= 1e-8 * exact, "{e} vs {exact}");
        let t = period_t(&m, xp, r).unwrap();
        assert!((t - PI / k).abs() <= 1e-8 * PI / k, "{t}");
    }
}

#[test]
fn shallow_well_converges() {
    let m = cat("ex-13-6-34-i", 1.0, 1.0, 1.0);
    for gap in [3e-10, 1e-9, 1e-8] {
        let e = eta(&m, [0.25, 0.0], 0.75 - gap).unwrap();
        let exact = PI * gap / 2.0;
        assert!((e - exact).abs() <= 1e-4 * exact, "{e} vs {exact}");
    }
}

#[test]
fn turning_point_residual() {
    let m = curved_model();
    let td = turning_points(&m, [0.2, -0.4], 0.1).unwrap();
    for z in [td.zminus, td.zplus] {
        let x = [0.2, -0.4, z];
        let res = m.potential(&x) + 0.1 * m.scalar_intensity(&x);
        assert!(res.abs() <= 1e-10, "{res}");
    }
    assert!(td.zminus < td.z0 && td.z0 < td.zplus);
}

#[test]
fn closed_well_and_degenerate_limit() {
    let k = 2.0;
    let m = cat("ex-13-6-34-i", k, 1.0, 1.0);
    let xp = [0.25, 0.0];
    let rb = rbar(&m, xp).unwrap();
    assert!((rb - 0.75).abs() < 1e-12);
    assert_eq!(eta(&m, xp, rb + 0.1).unwrap(), 0.0);
    assert!(matches!(period_t(&m, xp, rb + 0.1), Err(Error::EmptyWell { .. })));
    assert!(matches!(turning_points(&m, xp, rb), Err(Error::EmptyWell { .. })));
    let w = well(&m, xp, rb - 1e-12).unwrap();
    assert_eq!(w.eta, 0.0);
    let t = w.period.unwrap();
    assert!((t - PI / k).abs() < 1e-4 * PI / k, "{t}");
}

#[test]
fn quadratic_model_hessian() {
    let (k, l1, l2) = (1.0, 1.0, 0.5);
    let m = model_ii(k, l1, l2, 1.0);
    let xp = [0.2, -0.1];
    let d = eta_grad_hess(&m, xp, 0.0, 1e-3).unwrap();
    let g = [-PI * l1 * xp[0] / k, -PI * l2 * xp[1] / k];
    assert!((d.grad[0] - g[0]).abs() < 1e-7 && (d.grad[1] - g[1]).abs() < 1e-7, "{:?}", d.grad);
    assert!((d.hess[0][0] + PI * l1 / k).abs() < 1e-5, "{:?}", d.hess);
    assert!((d.hess[1][1] + PI * l2 / k).abs() < 1e-5);
    assert!(d.hess[0][1].abs() < 1e-5);
    assert!(!d.touches_closed);
}

#[test]
fn constant_model_is_flat() {
    let m = cat("ex-13-6-34-iv", 1.0, 1.0, 1.0);
    let e0 = eta(&m, [0.0, 0.0], 0.2).unwrap();
    let e1 = eta(&m, [0.7, -0.3], 0.2).unwrap();
    assert!((e0 - e1).abs() < 1e-12);
    assert!((e0 - PI * 0.8 / 2.0).abs() < 1e-9);
}

#[test]
fn horizontal_field_is_rejected() {
    let m = catalog::build("ex-13-6-36", &CatalogParams::default()).unwrap();
    assert!(matches!(minimize_z0(&m, [0.5, 0.2]), Err(Error::FiberNotVertical { .. })));
}

#[test]
fn double_well_is_rejected() {
    let mut m = cat("ex-13-6-34-iv", 1.0, 1.0, 1.0);
    m.scalpot = ScalarMap::poly(Poly::new([(1.0, [0, 0, 4]), (-2.0, [0, 0, 2])]));
    assert!(matches!(minimize_z0(&m, [0.0, 0.0]), Err(Error::MultipleMinima { .. })));
    m.scalpot = ScalarMap::poly(Poly::new([(-1.0, [0, 0, 2])]));
    assert!(matches!(minimize_z0(&m, [0.0, 0.0]), Err(Error::NonConfinement(_))));
}

#[test]
fn verdicts_on_catalog_models() {
    let eps = 1e-3;
    let r = [0.0, 0.2];
    let build = |m: &ModelSpec| action_grid(m, [-0.5, -0.5], [0.5, 0.5], [17, 17], &r, 1e-3).unwrap();

    let rep = classify_nondegeneracy(&build(&cat("ex-13-6-34-i", 1.0, 1.0, 1.0)), eps);
    for v in &rep.per_r {
        assert!(v.gradient_bound.holds);
        assert!((v.gradient_bound.worst.unwrap() - PI / 2.0).abs() < 1e-6);
        assert!(v.hessian_determinant.holds && v.hessian_determinant.worst.is_none());
        assert!(v.critical_set_null);
    }

    let rep = classify_nondegeneracy(&build(&model_ii(1.0, 1.0, 1.0, 1.0)), eps);
    for v in &rep.per_r {
        assert!(!v.gradient_bound.holds);
        assert!(v.gradient_bound.worst.unwrap() < 1e-6);
        assert!(v.hessian_determinant.holds);
        assert!((v.hessian_determinant.worst.unwrap() - PI * PI).abs() < 1e-3);
        assert!(v.hessian_norm.holds);
        assert!(v.critical_set_null);
    }

    let rep = classify_nondegeneracy(&build(&cat("ex-13-6-34-iv", 1.0, 1.0, 1.0)), eps);
    for v in &rep.per_r {
        assert!(!v.gradient_bound.holds);
        assert!(!v.hessian_determinant.holds);
        assert!(!v.hessian_norm.holds);
        assert!(!v.critical_set_null);
        assert_eq!(v.critical_fractions.last().unwrap().1, 1.0);
    }
}

#[test]
fn grid_flags_closed_region() {
    let m = cat("ex-13-6-34-i", 1.0, 1.0, 0.5);
    let g = action_grid(&m, [-1.0, 0.0], [1.0, 0.0], [9, 1], &[0.0], 1e-3).unwrap();
    for i in 0..9 {
        let k = g.index(0, i, 0);
        let x1 = g.x1[i];
        if x1 >= 0.5 {
            assert!(g.flags[k] & FLAG_CLOSED != 0, "x1 = {x1}");
            assert_eq!(g.eta[k], 0.0);
        } else {
            assert_eq!(g.flags[k] & FLAG_CLOSED, 0);
            assert!((g.eta[k] - PI * (0.5 - x1) / 2.0).abs() < 1e-8);
        }
    }
    assert!(g.flags[g.index(0, 6, 0)] & FLAG_STENCIL_CLOSED != 0);
}

#[test]
fn critical_zone_of_quadratic_model() {
    let m = model_ii(1.0, 1.0, 1.0, 1.0);
    for gb in [0.2, 0.1] {
        let z = critical_zone_measure(&m, 0.0, gb).unwrap();
        let exact = gb * gb / PI;
        assert!((z.area - exact).abs() < 0.03 * exact, "{} vs {exact}", z.area);
        assert!(!z.degenerate);
        assert!((z.open_area - PI).abs() < 0.02 * PI, "{}", z.open_area);
    }
    let m = cat("ex-13-6-34-iv", 1.0, 1.0, 1.0);
    let z = critical_zone_measure(&m, 0.0, 0.05).unwrap();
    assert!(z.degenerate);
    assert!((z.area - 4.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eta_decreases_in_r_with_slope_half_period(x1 in -0.6f64..0.6, x2 in -0.6f64..0.6, r in 0.0f64..0.4) {
        let m = curved_model();
        let xp = [x1, x2];
        let rb = rbar(&m, xp).unwrap();
        prop_assume!(r + 0.01 < rb);
        let dr = 1e-4;
        let ep = eta(&m, xp, r + dr).unwrap();
        let em = eta(&m, xp, r - dr).unwrap();
        let e0 = eta(&m, xp, r).unwrap();
        prop_assert!(ep < e0 && e0 < em);
        let t = period_t(&m, xp, r).unwrap();
        let f = m.scalar_intensity(&[x1, x2, 0.0]);
        let slope = (ep - em) / (2.0 * dr);
        prop_assert!((slope + 0.5 * f * t).abs() <= 1e-6 * t, "{} vs {}", slope, -0.5 * f * t);
    }

    #[test]
    fn eta_is_nonnegative_and_vanishes_beyond_rbar(x1 in -0.9f64..0.9, x2 in -0.9f64..0.9, r in 0.0f64..2.0) {
        let m = curved_model();
        let xp = [x1, x2];
        let rb = rbar(&m, xp).unwrap();
        let e = eta(&m, xp, r).unwrap();
        prop_assert!(e >= 0.0);
        if r >= rb {
            prop_assert_eq!(e, 0.0);
        }
    }
}

#[test]
fn shifted_well_minimiser() {
    let mut m = cat("ex-13-6-34-iv", 1.0, 1.0, 1.0);
    m.scalpot = ScalarMap::poly(Poly::new([(1.0, [0, 0, 2]), (-0.6, [0, 0, 1]), (0.09, [0, 0, 0])]));
    let z0 = minimize_z0(&m, [0.1, 0.2]).unwrap();
    assert!((z0 - 0.3).abs() <= 1e-10, "{z0}");
}

#[test]
fn quadratic_model_value_and_collapse() {
    let m = model_ii(1.0, 1.0, 1.0, 1.0);
    let e = eta(&m, [0.5, 0.5], 0.25).unwrap();
    assert!((e - PI / 8.0).abs() <= 1e-9, "{e}");
    let rb = rbar(&m, [0.5, 0.5]).unwrap();
    let td = turning_points(&m, [0.5, 0.5], rb - 1e-14).unwrap();
    assert!((td.zplus - td.z0).abs() < 1e-6 && (td.z0 - td.zminus).abs() < 1e-6);
}

#[test]
fn quartic_well_period_against_brute_force() {
    let mut m = cat("ex-13-6-34-iv", 1.0, 1.0, 1.0);
    m.scalpot = ScalarMap::poly(Poly::new([(1.0, [0, 0, 4])]));
    // T = ∫ dz/√(c − z⁴) over |z| < c^{1/4}; substitute z = c^{1/4}(1 − u²) on each half
    let brute = |c: f64| {
        let a = c.powf(0.25);
        let n = 400_000;
        let mut s = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let z = a * (1.0 - u * u);
            s += 2.0 * a * u / (c - z.powi(4)).sqrt();
        }
        2.0 * s / n as f64
    };
    let t1 = period_t(&m, [0.0, 0.0], 0.2).unwrap();
    let t2 = period_t(&m, [0.0, 0.0], 0.6).unwrap();
    assert!((t1 - brute(0.8)).abs() < 1e-6 * t1, "{t1} {}", brute(0.8));
    assert!((t2 - brute(0.4)).abs() < 1e-6 * t2);
    assert!(t2 > t1);
}
