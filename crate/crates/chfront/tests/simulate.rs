use std::f64::consts::PI;

use chfront::dispersion::ModelParams;
use chfront::evans::{eigenvalue_near, find_hopf_crossing};
use chfront::simulate::{
    classify, power_law_fit, run, tail_amplitude_frequency, Classification, Diagnostics, Perturbation, SimConfig,
};

fn c_star() -> f64 {
    find_hopf_crossing(&ModelParams::default()).unwrap().c_star
}

fn below_onset(t_final: f64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.params = cfg.params.with_speed(c_star() - 0.05);
    cfg.t_final = t_final;
    cfg
}

fn mass_drift(d: &Diagnostics) -> f64 {
    let m0 = d.mass_series[0].1;
    d.mass_series.iter().map(|m| (m.1 - m0).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_state_is_invariant() {
    let mut cfg = below_onset(50.0);
    cfg.perturbation = Perturbation::None;
    let (u, d) = run(&cfg, None).unwrap();
    assert!(u.iter().all(|&v| v == 0.0));
    assert_eq!(d.peak, 0.0);
}

#[test]
fn mean_conserved_over_many_steps() {
    let cfg = below_onset(500.0);
    assert!(cfg.t_final / cfg.dt >= 1e5);
    let (_, d) = run(&cfg, None).unwrap();
    assert!(mass_drift(&d) < 1e-12, "{}", mass_drift(&d));
}

#[test]
fn linear_growth_matches_determinant_root() {
    let mut cfg = below_onset(700.0);
    cfg.perturbation = Perturbation::Gaussian { x0: -10.0, amp: 1e-9, width: 1.0 };
    cfg.record_dt = 0.1;
    let lam = eigenvalue_near(&cfg.params, find_hopf_crossing(&cfg.params).unwrap().lambda_star).unwrap();
    let (_, d) = run(&cfg, None).unwrap();
    // envelope: max |u| per oscillation period
    let period = 2.0 * PI / lam.im.abs();
    let mut pts = Vec::new();
    let mut t0 = 300.0;
    while t0 + period <= cfg.t_final {
        let m = d
            .probe_series
            .iter()
            .filter(|p| p.0 >= t0 && p.0 < t0 + period)
            .map(|p| p.1.abs())
            .fold(0.0, f64::max);
        pts.push((t0, m.ln()));
        t0 += period;
    }
    let n = pts.len() as f64;
    let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let rate = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    assert!(d.peak < 1e-5, "left the linear regime: {}", d.peak);
    assert!((rate - lam.re).abs() < 0.15 * lam.re, "rate {rate} vs {}", lam.re);
}

#[test]
fn halving_dt_keeps_amplitude() {
    let a = below_onset(1500.0);
    let mut b = a.clone();
    b.dt = a.dt / 2.0;
    let (_, da) = run(&a, None).unwrap();
    let (_, db) = run(&b, None).unwrap();
    assert_eq!(da.classification, Classification::Sustained);
    let rel = (da.amplitude - db.amplitude).abs() / db.amplitude;
    assert!(rel < 0.01, "{} vs {}: {rel}", da.amplitude, db.amplitude);
}

#[test]
fn doubling_domain_keeps_amplitude() {
    let a = below_onset(1500.0);
    let mut b = a.clone();
    b.domain_length *= 2.0;
    b.n_modes *= 2;
    let (_, da) = run(&a, None).unwrap();
    let (_, db) = run(&b, None).unwrap();
    let rel = (da.amplitude - db.amplitude).abs() / db.amplitude;
    assert!(rel < 0.01, "{} vs {}: {rel}", da.amplitude, db.amplitude);
    assert!((da.frequency - db.frequency).abs() < 0.01 * db.frequency);
}

#[test]
fn dealiased_energy_above_cutoff_is_negligible() {
    // the sharp coefficient limits spectral decay, so this needs dx ≈ 0.08
    let mut cfg = below_onset(1500.0);
    cfg.n_modes = 2048;
    let (_, d) = run(&cfg, None).unwrap();
    assert!(d.aliasing_fraction < 1e-10, "{:e}", d.aliasing_fraction);
}

#[test]
fn amplitude_and_frequency_of_a_pure_tone() {
    let s: Vec<(f64, f64)> = (0..20000).map(|i| (i as f64 * 0.1, 0.3 * (1.3 * i as f64 * 0.1).sin())).collect();
    let (a, w) = tail_amplitude_frequency(&s, 0.2);
    assert!((a - 0.3).abs() < 1e-3);
    assert!((w - 1.3).abs() < 1e-3, "{w}");
}

fn synthetic(f: impl Fn(f64) -> f64) -> Diagnostics {
    Diagnostics {
        probe_series: (0..10000).map(|i| (i as f64 * 0.5, f(i as f64 * 0.5))).collect(),
        mass_series: vec![],
        amplitude: 0.0,
        frequency: 0.0,
        classification: Classification::Indeterminate,
        peak: 0.0,
        aliasing_fraction: 0.0,
    }
}

#[test]
fn classification_of_synthetic_signals() {
    let decaying = synthetic(|t| (-0.05 * t).exp() * t.sin());
    assert_eq!(classify(&decaying, 200.0), Classification::Decaying);
    let sustained = synthetic(|t| 0.1 * (1.2 * t).sin());
    assert_eq!(classify(&sustained, 200.0), Classification::Sustained);
    let growing = synthetic(|t| 1e-6 * (0.005 * t).exp() * t.sin());
    assert_eq!(classify(&growing, 200.0), Classification::Indeterminate);
    assert_eq!(classify(&sustained, 5000.0), Classification::Indeterminate);
}

#[test]
fn power_law_recovers_exponent() {
    let rows: Vec<(f64, f64)> = (1..=8).map(|k| 1.5 - 0.005 * k as f64).map(|c| (c, 2.0 * (1.5 - c).sqrt())).collect();
    let (beta, ln_a) = power_law_fit(1.5, &rows).unwrap();
    assert!((beta - 0.5).abs() < 1e-12 && (ln_a - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn invalid_configs_rejected() {
    let mut cfg = SimConfig::default();
    cfg.domain_length = 50.0;
    assert!(run(&cfg, None).is_err());
    let mut cfg = SimConfig::default();
    cfg.dt = -1.0;
    assert!(run(&cfg, None).is_err());
}

