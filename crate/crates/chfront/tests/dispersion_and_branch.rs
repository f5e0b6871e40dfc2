use chfront::absolute_spectrum::{genericity_check, trace_absolute, TOL_ABS};
use chfront::branch_point::{
    closed_form_spreading, find_double_root, find_spreading_speed, newton_double_root, track_branch_point,
};
use chfront::dispersion::{
    border_point, check_no_resonance, dispersion_dnunu, eval_dispersion, relative_residual, spatial_roots, ModelParams,
    Side, TOL_ROOT,
};
use chfront::C64;
use proptest::prelude::*;

const C_LIN: f64 = 1.622_075_925_917_433_38;
const LAMBDA_LIN_IM: f64 = 1.241_978_582_367_870_62;
const MU_LIN: f64 = -0.261_864_413_951_873_081;
const KAPPA_LIN: f64 = 0.840_070_779_091_305_987;

#[test]
fn closed_forms_at_unit_plateau() {
    let s = closed_form_spreading(1.0).unwrap();
    assert!((s.c_lin - C_LIN).abs() < 1e-14);
    assert!(s.lambda_lin.re.abs() < 1e-14);
    assert!((s.lambda_lin.im - LAMBDA_LIN_IM).abs() < 1e-14);
    assert!((s.mu_lin - MU_LIN).abs() < 1e-14);
    assert!((s.kappa_lin - KAPPA_LIN).abs() < 1e-14);
}

#[test]
fn spreading_speed_matches_closed_form() {
    for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let cf = closed_form_spreading(alpha).unwrap();
        let num = find_spreading_speed(1.0, alpha).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(num.c_lin, cf.c_lin) < 1e-8, "alpha {alpha}");
        assert!((num.lambda_lin - cf.lambda_lin).norm() / cf.lambda_lin.norm() < 1e-8);
        assert!((num.nu_lin() - cf.nu_lin()).norm() / cf.nu_lin().norm() < 1e-8);
    }
}

#[test]
fn spreading_scales_with_plateau_coefficient() {
    // d is invariant under ν → a^{1/2}ν, λ → a²λ, c → a^{3/2}c, χ → aχ
    let base = closed_form_spreading(1.0).unwrap();
    for a in [0.5, 3.0] {
        let s = closed_form_spreading(a).unwrap();
        assert!((s.c_lin - a.powf(1.5) * base.c_lin).abs() < 1e-12 * s.c_lin);
        assert!((s.lambda_lin - base.lambda_lin * a * a).norm() < 1e-12 * s.lambda_lin.norm());
    }
}

#[test]
fn branch_point_is_pinched_double_root() {
    let bp = track_branch_point(1.0, 1.56).unwrap();
    assert!(bp.pinched);
    assert!(bp.residual_d < 1e-10 && bp.residual_dnu < 1e-10);
    assert!(dispersion_dnunu(1.0, bp.nu_br).norm() > 1e-6);
    // below the linear spreading speed the plateau is absolutely unstable
    assert!(bp.lambda_br.re > 0.0);
    let faster = track_branch_point(1.0, 1.7).unwrap();
    assert!(faster.lambda_br.re < 0.0);
}

#[test]
fn conjugate_seeds_give_conjugate_branch_points() {
    let ls = closed_form_spreading(1.0).unwrap();
    let a = find_double_root(1.0, 1.5, (ls.lambda_lin, ls.nu_lin())).unwrap();
    let b = find_double_root(1.0, 1.5, (ls.lambda_lin.conj(), ls.nu_lin().conj())).unwrap();
    assert!((a.lambda_br - b.lambda_br.conj()).norm() < 1e-13);
    assert!((a.nu_br - b.nu_br.conj()).norm() < 1e-13);
    assert_eq!(a.pinched, b.pinched);
}

#[test]
fn absolute_spectrum_pins_middle_roots() {
    let bp = track_branch_point(1.0, 1.56).unwrap();
    let curve = trace_absolute(&bp, 1.0, 0.01).unwrap();
    assert!(curve.points.len() > 20);
    for p in &curve.points {
        let roots = spatial_roots(1.0, 1.56, p.lambda).unwrap().nu;
        let (a, b) = p.nu_pair;
        assert!(eval_dispersion(1.0, 1.56, p.lambda, a).norm() < 1e-10);
        assert!(eval_dispersion(1.0, 1.56, p.lambda, b).norm() < 1e-10);
        assert!((a.re - b.re).abs() < TOL_ABS);
        let is = |z: C64, k: usize| (z - roots[k]).norm() < 1e-8;
        assert!((is(a, 1) && is(b, 2)) || (is(a, 2) && is(b, 1)), "pair not the middle roots at {}", p.lambda);
    }
    // Re λ does not increase leaving the branch point
    let first: Vec<f64> = curve.points.iter().take(10).map(|p| p.lambda.re).collect();
    assert!(first[0] <= bp.lambda_br.re + 1e-9);
    assert!(first.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(genericity_check(&curve).generic);
}

#[test]
fn borders_touch_origin_only_for_the_exterior() {
    let c = 1.56;
    assert!(border_point(Side::Minus, -1.0, c, 0.0, 0.0).norm() < 1e-15);
    // plateau border reaches Re λ = 1/4 at k² = 1/2
    let top = border_point(Side::Plus, 1.0, c, 0.0, 0.5f64.sqrt());
    assert!((top.re - 0.25).abs() < 1e-14);
}

#[test]
fn resonance_check_passes_at_first_crossing() {
    let p = ModelParams::default().with_speed(1.563_823_467_646_276_8);
    let r = check_no_resonance(&p, 1.179_652_219_153_442_9, 3).unwrap();
    assert!(r.pass, "{:?}", r.flagged());
    assert_eq!(r.entries.len(), 4);
}

#[test]
fn newton_reports_degenerate_seed_failure() {
    // d_νν = −12ν² − 2χ vanishes at ν = 1 for χ = −6
    let e = newton_double_root(-6.0, 1.5, (C64::new(0.0, 0.0), C64::new(1.0, 0.0))).unwrap_err();
    assert!(matches!(e, chfront::branch_point::BranchError::DegenerateDoubleRoot(_)), "{e}");
}

fn lambda_strategy() -> impl Strategy<Value = (f64, f64, C64)> {
    (-2.0..2.0f64, 0.1..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(chi, c, re, im)| (chi, c, C64::new(re, im)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn roots_satisfy_dispersion((chi, c, lambda) in lambda_strategy()) {
        let s = spatial_roots(chi, c, lambda).unwrap();
        for nu in s.nu {
            prop_assert!(relative_residual(chi, c, lambda, nu) < TOL_ROOT);
        }
    }

    #[test]
    fn ordering_is_deterministic_and_descending((chi, c, lambda) in lambda_strategy()) {
        let a = spatial_roots(chi, c, lambda).unwrap();
        let b = spatial_roots(chi, c, lambda).unwrap();
        for (x, y) in a.nu.iter().zip(&b.nu) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        prop_assert!(a.nu.windows(2).all(|w| w[0].re >= w[1].re));
    }

    #[test]
    fn conjugation_equivariant((chi, c, lambda) in lambda_strategy()) {
        let a = spatial_roots(chi, c, lambda).unwrap();
        let b = spatial_roots(chi, c, lambda.conj()).unwrap();
        for r in a.nu {
            let hit = b.nu.iter().any(|s| (s - r.conj()).norm() < 1e-10 * (1.0 + r.norm()));
            prop_assert!(hit);
        }
    }
}

/// Smallest `R` with Morse index 2 on `[R, ∞)` along a horizontal ray.
fn morse_threshold(chi: f64, c: f64, im: f64) -> f64 {
    let two = |re: f64| spatial_roots(chi, c, C64::new(re, im)).unwrap().morse_index == 2;
    let (mut lo, mut hi) = (-5.0, 50.0);
    assert!(two(hi));
    if two(lo) {
        return lo;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if two(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn morse_index_two_right_of_threshold(chi in -2.0..2.0f64, c in 0.1..3.0f64, im in -3.0..3.0f64) {
        let r0 = morse_threshold(chi, c, im);
        for k in 0..20 {
            let re = r0 + 1e-6 + k as f64 * 2.5;
            prop_assert_eq!(spatial_roots(chi, c, C64::new(re, im)).unwrap().morse_index, 2);
        }
    }
}
