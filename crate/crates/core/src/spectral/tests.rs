use super::*;
use crate::model::catalog::{self, CatalogParams};
use crate::poly::{Poly, ScalarMap};
use proptest::prelude::*;

fn harmonic_fiber(k: f64, c: f64, h: f64) -> ModelSpec {
    let p = CatalogParams { k: Some(k), ..Default::default() };
    catalog::build("ex-13-6-34-iv", &p).unwrap().with_params(1.0, h, c)
}

fn isotropic_model(p: &IsotropicParams) -> ModelSpec {
    let l2 = p.l * p.l;
    let cp = CatalogParams { k: Some(p.k), l1: Some(l2), l2: Some(l2), ..Default::default() };
    catalog::build("ex-13-6-34-ii", &cp).unwrap().with_params(p.mu, p.h, p.tau).with_kind(p.kind)
}

/// Closed-form spectrum `hΩ(2n+|q|+1) − μhq + (2m+1)kh` (minus `μh` for
/// Pauli), `Ω = (μ² + 4l²)^{1/2}`, enumerated directly.
fn fock_darwin_count(p: &IsotropicParams) -> u64 {
    let om = (p.mu * p.mu + 4.0 * p.l * p.l).sqrt();
    let shift = if p.kind == OperatorKind::SchrodingerPauli { p.mu * p.h } else { 0.0 };
    let mut count = 0;
    for m in 0..10_000u64 {
        let ez = (2 * m + 1) as f64 * p.k * p.h - shift;
        if ez >= p.tau {
            break;
        }
        for n in 0..10_000u64 {
            let base = p.h * om * (2 * n + 1) as f64 + ez;
            if base - p.mu * p.h * 1e6 >= p.tau && base >= p.tau + 1e9 {
                break;
            }
            let mut any = false;
            for q in -100_000i64..=100_000 {
                let e = p.h * om * ((2 * n) as f64 + q.abs() as f64 + 1.0) - p.mu * p.h * q as f64 + ez;
                if e < p.tau {
                    count += 1;
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
    }
    count
}

#[test]
fn ladder_examples() {
    let s = landau_ladder(OperatorKind::Schrodinger, 4.0, 0.25, 6.0);
    assert_eq!(s.r_values, vec![1.0, 3.0, 5.0]);
    assert_eq!(s.j_max, Some(2));
    let p = landau_ladder(OperatorKind::SchrodingerPauli, 10.0, 0.2, 10.0);
    assert_eq!(p.r_values, vec![0.0, 4.0, 8.0]);
    let p = landau_ladder(OperatorKind::SchrodingerPauli, 1.5, 1.0, 1.0);
    assert_eq!(p.r_values, vec![0.0]);
    let e = landau_ladder(OperatorKind::Schrodinger, 2.0, 1.0, 1.0);
    assert!(e.r_values.is_empty() && e.j_max.is_none());
}

#[test]
fn harmonic_fiber_counts() {
    for (k, c, h) in [(1.0, 1.0, 0.125), (1.0, 0.9, 0.0625), (2.0, 1.3, 0.03125), (1.0, 0.05, 0.125)] {
        let m = harmonic_fiber(k, c, h);
        let want = (0..).take_while(|&j| (2 * j + 1) as f64 * k * h < c).count();
        assert_eq!(fiber_count(&m, [0.1, 0.2], 0.0, 0.0, 64).unwrap(), want, "k={k} c={c} h={h}");
    }
}

#[test]
fn fiber_eigenvalues_are_oscillator_levels() {
    let (k, h) = (1.5, 0.1);
    let m = harmonic_fiber(k, 1.0, h);
    let e = fiber_eigenvalues(&m, [0.0, 0.0], 0.0, 0.0, 64).unwrap();
    assert_eq!(e.len(), 3);
    for (j, x) in e.iter().enumerate() {
        let exact = (2 * j + 1) as f64 * k * h - 1.0;
        assert!((x - exact).abs() < 1e-7, "{x} vs {exact}");
    }
}

#[test]
fn bohr_sommerfeld_closed_form() {
    let p = CatalogParams { k: Some(1.0), l: Some(1.0), ..Default::default() };
    let m = catalog::build("ex-13-6-34-i", &p).unwrap().with_params(1.0, 0.1, 1.0);
    // τ − l x₁ − r = 1 at x₁ = 0
    assert!((bohr_sommerfeld_count(&m, [0.0, 0.3], 0.0).unwrap() - 5.0).abs() < 1e-8);
    assert_eq!(bohr_sommerfeld_count(&m, [2.0, 0.0], 0.0).unwrap(), 0.0);
}

#[test]
fn quartic_fiber_semiclassics() {
    let mut m = harmonic_fiber(1.0, 1.0, 0.05);
    m.scalpot = ScalarMap::poly(Poly::new([(1.0, [0, 0, 4])]));
    for r in [0.0, 0.3, 0.6] {
        let n = fiber_count(&m, [0.0, 0.0], r, 0.0, 64).unwrap() as f64;
        let bs = bohr_sommerfeld_count(&m, [0.0, 0.0], r).unwrap();
        assert!((n - bs).abs() <= 2.0, "{n} vs {bs}");
    }
}

#[test]
fn non_confining_fiber_is_reported() {
    let mut m = harmonic_fiber(1.0, 1.0, 0.1);
    m.scalpot = ScalarMap::poly(Poly::new([(-0.01, [0, 0, 0])]));
    assert!(matches!(fiber_count(&m, [0.0, 0.0], 0.0, 0.0, 64), Err(Error::NonConfinement(_))));
}

#[test]
fn lattice_examples() {
    assert_eq!(lattice_count(1.0, 1.0, 10.0, 0.1, 1.0).unwrap(), 125);
    assert!((lattice_weyl(1.0, 1.0, 10.0, 0.1, 1.0) - 125.0).abs() < 1e-9);
    assert_eq!(lattice_count(1.0, 1.0, 10.0, 0.1, 0.11).unwrap(), 0);
    assert_eq!(lattice_weyl(1.0, 1.0, 10.0, 0.1, 1e-9), 0.0);
}

#[test]
fn triangle_fraction_cases() {
    assert_eq!(triangle_fraction(1.0, 2.0, 3.0), 0.0);
    assert_eq!(triangle_fraction(-1.0, -2.0, -3.0), 1.0);
    assert!((triangle_fraction(-1.0, 1.0, 1.0) - 0.25).abs() < 1e-15);
    assert!((triangle_fraction(1.0, -1.0, -1.0) - 0.75).abs() < 1e-15);
}

#[test]
fn radial_count_matches_closed_form() {
    let cases = [
        IsotropicParams { k: 1.0, l: 1.0, mu: 4.0, h: 0.25, tau: 3.1, kind: OperatorKind::Schrodinger },
        IsotropicParams { k: 1.0, l: 1.0, mu: 12.0, h: 0.125, tau: 1.0, kind: OperatorKind::SchrodingerPauli },
        IsotropicParams { k: 0.7, l: 1.3, mu: 2.0, h: 0.1, tau: 2.05, kind: OperatorKind::Schrodinger },
        IsotropicParams { k: 1.0, l: 0.5, mu: 24.0, h: 0.0625, tau: 0.93, kind: OperatorKind::SchrodingerPauli },
    ];
    for p in cases {
        let want = fock_darwin_count(&p);
        assert!(want > 0);
        assert_eq!(isotropic_exact_count(&p).unwrap(), want, "{p:?}");
    }
    let p = IsotropicParams { k: 1.0, l: 1.0, mu: 4.0, h: 0.25, tau: 0.1, kind: OperatorKind::Schrodinger };
    assert_eq!(isotropic_exact_count(&p).unwrap(), 0);
}

#[test]
fn second_term_closed_forms() {
    let p = IsotropicParams { k: 1.0, l: 1.0, mu: 12.0, h: 0.125, tau: 1.0, kind: OperatorKind::SchrodingerPauli };
    let m = isotropic_model(&p);
    let ladder = model_ladder(&m, max_rbar(&m, [-1.1, -1.1], [1.1, 1.1], 23).unwrap());
    assert_eq!(ladder.r_values, vec![0.0]);
    let (lo, hi) = ([-1.1, -1.1], [1.1, 1.1]);
    // n(x′) = #{m : (2m+1)kh < τ − |x′|²}, whose sub-level sets are discs
    let exact_area: f64 = (0..).map(|j| p.tau - (2 * j + 1) as f64 * p.k * p.h).take_while(|&c| c > 0.0).map(|c| PI * c).sum();
    let pref = p.mu / (2.0 * PI * p.h);
    let st = second_term_integral(&m, &ladder, lo, hi, &SecondTermOptions::default()).unwrap();
    assert!(!st.touches_boundary);
    assert!((st.per_level[0] - exact_area).abs() < 1e-5 * exact_area, "{} vs {exact_area}", st.per_level[0]);
    assert!((st.value - pref * exact_area).abs() < 1e-5 * pref * exact_area);

    let bs = SecondTermOptions { method: SecondTermMethod::BohrSommerfeld, nodes: 33, ..Default::default() };
    let st = second_term_integral(&m, &ladder, lo, hi, &bs).unwrap();
    // ∫η dx′ = π²τ²/(4k) for unit l
    let want = p.mu / (2.0 * PI * PI * p.h * p.h) * PI * PI / 4.0;
    assert!((st.value - want).abs() < 0.01 * want, "{} vs {want}", st.value);

    let mid = SecondTermOptions { method: SecondTermMethod::FiberMidpoint, nodes: 33, ..Default::default() };
    let st = second_term_integral(&m, &ladder, lo, hi, &mid).unwrap();
    assert!((st.per_level[0] - exact_area).abs() < 0.03 * exact_area);
}

#[test]
fn closed_wells_give_zero_second_term() {
    let p = IsotropicParams { k: 1.0, l: 1.0, mu: 12.0, h: 0.125, tau: 0.1, kind: OperatorKind::SchrodingerPauli };
    let m = isotropic_model(&p);
    let ladder = model_ladder(&m, 0.1);
    let st = second_term_integral(&m, &ladder, [-1.0, -1.0], [1.0, 1.0], &SecondTermOptions { nodes: 17, ..Default::default() }).unwrap();
    assert_eq!(st.value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lattice_matches_double_loop(l in 0.2f64..3.0, k in 0.2f64..3.0, mu in 1.0f64..50.0, h in 0.01f64..0.5, tau in 0.0f64..3.0) {
        let a = l * h / mu;
        let b = k * h;
        let mut want = 0u64;
        let mut j = 0u64;
        while (2 * j + 1) as f64 * b < tau {
            let mut i = 0u64;
            while (2 * i + 1) as f64 * a + (2 * j + 1) as f64 * b < tau {
                want += 1;
                i += 1;
            }
            j += 1;
        }
        prop_assert_eq!(lattice_count(l, k, mu, h, tau).unwrap(), want);
        prop_assert!(lattice_count(l, k, mu, h, tau + 0.1).unwrap() >= want);
        prop_assert!(lattice_count(l, k, mu * 1.5, h, tau).unwrap() >= want);
    }

    #[test]
    fn harmonic_sturm_vs_bohr_sommerfeld(e in 0u32..5, c in 0.05f64..1.5, k in 0.5f64..2.0, x1 in -0.5f64..0.5) {
        let h = 0.125 / 2f64.powi(e as i32);
        let m = harmonic_fiber(k, c, h);
        let n = fiber_count(&m, [x1, 0.0], 0.0, 0.0, 64).unwrap() as f64;
        let bs = bohr_sommerfeld_count(&m, [x1, 0.0], 0.0).unwrap();
        prop_assert!((n - bs).abs() <= 1.0, "{} vs {}", n, bs);
    }

    #[test]
    fn fiber_count_monotone(r in 0.0f64..0.5, dr in 0.0f64..0.3, c in 0.3f64..1.2) {
        let m = harmonic_fiber(1.0, c, 0.1);
        let n0 = fiber_count(&m, [0.0, 0.0], r, 0.0, 64).unwrap();
        let n1 = fiber_count(&m, [0.0, 0.0], r + dr, 0.0, 64).unwrap();
        let n2 = fiber_count(&m, [0.0, 0.0], r, dr, 64).unwrap();
        prop_assert!(n1 <= n0 && n2 >= n0);
    }
}
