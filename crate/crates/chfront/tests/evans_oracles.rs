use chfront::branch_point::closed_form_spreading;
use chfront::dispersion::ModelParams;
use chfront::evans::{
    bilinear_integral, count_eigs_in_box, eigenfunction_profiles, eigenvalue_near, evans_back, evans_front,
    expansion_crossing, expansion_crossing_uncorrected, find_hopf_crossing, plateau_determinant,
    plateau_determinant_propagated, CBox, MIN_FIT_R2,
};
use chfront::C64;
use proptest::prelude::*;

/// `(ℓ, c*, Im λ*, dRe λ*/dc)` for the unit example.
const CROSSINGS: [(f64, f64, f64, f64); 3] = [
    (10.0, 1.419_159_629_241_085_7, 1.029_827_045_481_907_4, -0.2530),
    (20.0, 1.563_823_467_646_276_8, 1.179_652_219_153_442_9, -0.25947),
    (40.0, 1.606_501_950_773_225_9, 1.225_175_647_704_736_6, -0.26124),
];

#[test]
fn crossing_table() {
    for (ell, c, w, slope) in CROSSINGS {
        let cr = find_hopf_crossing(&ModelParams::default().with_ell(ell)).unwrap();
        assert!((cr.c_star - c).abs() < 1e-10, "ell {ell}: {}", cr.c_star);
        assert!((cr.lambda_star.im - w).abs() < 1e-10);
        assert!(cr.lambda_star.re.abs() < 1e-9);
        assert!((cr.d_re_dc - slope).abs() < 5e-4, "{}", cr.d_re_dc);
        assert!(cr.simple);
    }
}

#[test]
fn crossing_ignores_configured_speed() {
    let a = find_hopf_crossing(&ModelParams::default().with_speed(1.0)).unwrap();
    let b = find_hopf_crossing(&ModelParams::default().with_speed(2.0)).unwrap();
    assert_eq!(a.c_star, b.c_star);
}

fn gaps(expansion: fn(f64, f64) -> (f64, C64)) -> Vec<f64> {
    let ls = closed_form_spreading(1.0).unwrap();
    CROSSINGS
        .iter()
        .map(|&(ell, c, w, _)| {
            let (ch, lh) = expansion(ell, 1.0);
            (c - ls.c_lin - ch).abs() + (C64::new(0.0, w) - ls.lambda_lin - lh).norm()
        })
        .collect()
}

#[test]
fn expansion_remainder_is_third_order() {
    let g = gaps(expansion_crossing);
    for w in g.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((2.5..=3.5).contains(&order), "{order}");
    }
}

#[test]
fn uncorrected_expansion_converges_slower() {
    // without κ_lin in the eigenvalue correction part of the gap is O(ℓ⁻²)
    let g = gaps(expansion_crossing_uncorrected);
    let fixed = gaps(expansion_crossing);
    let order = |v: &[f64]| (v[1] / v[2]).log2();
    assert!(order(&g) < 2.6 && order(&fixed) > 2.9, "{} {}", order(&g), order(&fixed));
    assert!(fixed[2] < 0.5 * g[2]);
}

#[test]
fn counts_at_and_past_crossing() {
    let p = ModelParams::default().with_speed(CROSSINGS[1].1);
    assert_eq!(count_eigs_in_box(&p, &CBox::new(-0.02, 3.0, -3.0, 3.0), 800).unwrap(), 2);
    let past = p.with_speed(CROSSINGS[1].1 + 0.1);
    assert_eq!(count_eigs_in_box(&past, &CBox::new(1e-3, 3.0, -3.0, 3.0), 800).unwrap(), 0);
    let before = p.with_speed(CROSSINGS[1].1 - 0.05);
    assert_eq!(count_eigs_in_box(&before, &CBox::new(1e-3, 3.0, 0.0, 3.0), 800).unwrap(), 1);
}

#[test]
fn counts_add_over_a_partition() {
    let p = ModelParams::default().with_speed(CROSSINGS[1].1 - 0.03);
    let whole = count_eigs_in_box(&p, &CBox::new(-0.3, 2.0, 0.4, 3.0), 400).unwrap();
    let parts = [
        CBox::new(-0.3, 0.01, 0.4, 1.17),
        CBox::new(0.01, 2.0, 0.4, 1.17),
        CBox::new(-0.3, 0.01, 1.17, 3.0),
        CBox::new(0.01, 2.0, 1.17, 3.0),
    ];
    let sum: i64 = parts.iter().map(|b| count_eigs_in_box(&p, b, 400).unwrap()).sum();
    assert_eq!(whole, sum);
    assert!(whole >= 1);
}

#[test]
fn determinant_finite_for_long_plateaus() {
    for ell in [50.0, 100.0, 200.0] {
        let p = ModelParams::default().with_ell(ell);
        for z in [C64::new(0.1, 1.2), C64::new(-0.2, 0.5), C64::new(1.5, 2.5)] {
            let v = plateau_determinant(&p, z).unwrap();
            assert!(v.value.re.is_finite() && v.value.im.is_finite() && v.log_scale.is_finite());
            assert!(v.value.norm() > 0.0);
        }
    }
}

#[test]
fn eigenbasis_and_propagated_determinants_agree() {
    let p = ModelParams::default().with_speed(1.55);
    for z in [C64::new(0.05, 1.1), C64::new(-0.3, 0.8), C64::new(0.4, 2.0)] {
        let a = plateau_determinant(&p, z).unwrap();
        let b = plateau_determinant_propagated(&p, z).unwrap();
        let ratio = a.value * (a.log_scale - b.log_scale).exp() / b.value;
        // same determinant up to a λ-independent normalisation
        assert!(ratio.re.is_finite() && ratio.norm() > 0.0);
    }
    let root = eigenvalue_near(&p, C64::new(0.0, 1.17)).unwrap();
    let at = plateau_determinant_propagated(&p, root).unwrap().value.norm();
    let near = plateau_determinant_propagated(&p, root + 0.05).unwrap().value.norm();
    assert!(at < 1e-6 * near, "{at} vs {near}");
}

#[test]
fn front_and_back_nonzero_on_samples() {
    let p = ModelParams::default();
    for z in [C64::new(1.0, 0.5), C64::new(2.0, 2.5), C64::new(-0.4, 2.8)] {
        assert!(evans_front(&p, z).unwrap().modulus() > 0.0);
        assert!(evans_back(&p, z).unwrap().modulus() > 0.0);
    }
}

#[test]
fn eigenfunction_profiles_at_crossing() {
    let mut residuals = Vec::new();
    for (ell, ..) in &CROSSINGS[1..] {
        let p = ModelParams::default().with_ell(*ell);
        let cr = find_hopf_crossing(&p).unwrap();
        let grid: Vec<f64> = (0..=2000).map(|i| -ell - 5.0 + (2.0 * ell + 10.0) * i as f64 / 2000.0).collect();
        let prof = eigenfunction_profiles(&cr, &p, &grid).unwrap();
        assert!(prof.fit_r2 >= MIN_FIT_R2, "R^2 {}", prof.fit_r2);
        assert!(prof.a > 0.0 && prof.b > 0.0);
        let pairing = bilinear_integral(&prof.exact.p, &prof.exact.phi);
        assert!((pairing - 1.0).norm() < 1e-10);
        residuals.push(prof.plateau_residual);
    }
    // the sine envelope is accurate to O(1/ℓ)
    assert!(residuals[1] < 0.65 * residuals[0], "{residuals:?}");
    assert!(residuals[0] < 0.15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinant_conjugation_symmetric(re in -0.8..2.0f64, im in 0.05..3.0f64, c in 1.3..1.7f64) {
        let p = ModelParams::default().with_speed(c);
        let z = C64::new(re, im);
        let a = plateau_determinant(&p, z).unwrap();
        let b = plateau_determinant(&p, z.conj()).unwrap();
        prop_assert!((b.value - a.value.conj()).norm() <= 1e-8 * a.value.norm());
    }
}
