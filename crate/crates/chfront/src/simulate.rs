//! Pseudo-spectral time integration of
//! `u_t = −(u_xx + χ(x)u + γu³ − βu⁵)_xx + cu_x + c·s(x)` on a periodic domain.
//!
//! The linear part `−k⁴ + ick` is implicit and `k²·F[χu + γu³ − βu⁵]` is
//! explicit. The polynomial terms are evaluated on a grid padded to three
//! times the mode count, which is alias-free for the quintic term.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("time step {dt} unstable for mode k = {k} (growth factor {factor})")]
    UnstableTimeStep { dt: f64, k: f64, factor: f64 },
    #[error("blow-up at t = {t}: max |u| = {max}")]
    BlowupDetected { t: f64, max: f64 },
    #[error("front relaxation did not converge (residual {0:e})")]
    FrontRelaxationFailure(f64),
}

/// Spatial coefficient `χ(x)` of the linear term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    /// `χ₊` on `|x| < ℓ`, `χ₋` outside, the mean of both at `|x| = ℓ`.
    Piecewise,
    /// `χ₋ + (χ₊ − χ₋)·(tanh((x+ℓ)/w) − tanh((x−ℓ)/w))/2`.
    Smoothed { width: f64 },
    /// `χ₋ + Σ aₖ exp(−(x − xₖ)²/wₖ²)`.
    GaussianSum { centers: Vec<f64>, amplitudes: Vec<f64>, widths: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    None,
    Gaussian { x0: f64, amp: f64, width: f64 },
    /// `amp·(d/w)·e^{1/2 − (d/w)²}·√2` with `d = x − x0`: zero mass, peak `amp`.
    GaussianDipole { x0: f64, amp: f64, width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// First-order implicit-explicit Euler.
    Imex1,
    /// Second-order semi-implicit BDF.
    Sbdf2,
}

/// Source profile `s(x) = Σ aₖ exp(−(x − xₖ)²/wₖ²)` entering as `c·s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub centers: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
}

fn gaussian_sum(x: f64, centers: &[f64], amps: &[f64], widths: &[f64]) -> f64 {
    centers
        .iter()
        .zip(amps)
        .zip(widths)
        .map(|((c, a), w)| a * (-((x - c) / w).powi(2)).exp())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub domain_length: f64,
    pub n_modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub trigger: Trigger,
    pub source: Option<SourceProfile>,
    pub perturbation: Perturbation,
    pub probe_x: f64,
    /// Time between recorded samples.
    pub record_dt: f64,
    pub scheme: Scheme,
    /// Store the field every this many records (0: never).
    pub save_field_every: usize,
    pub blowup_cap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let params = ModelParams::default().with_gamma(-1.0);
        Self {
            domain_length: 160.0,
            n_modes: 512,
            dt: 0.005,
            t_final: 2000.0,
            trigger: Trigger::Piecewise,
            source: None,
            perturbation: Perturbation::Gaussian { x0: -params.ell / 2.0, amp: 1e-3, width: 1.0 },
            probe_x: 0.0,
            record_dt: 0.5,
            scheme: Scheme::Sbdf2,
            save_field_every: 0,
            blowup_cap: 1e3,
            params,
        }
    }
}

impl SimConfig {
    pub fn dx(&self) -> f64 {
        self.domain_length / self.n_modes as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_modes).map(|i| -self.domain_length / 2.0 + i as f64 * dx).collect()
    }

    pub fn chi_profile(&self) -> Vec<f64> {
        self.grid().iter().map(|&x| chi_at(self, x)).collect()
    }

    fn source_profile(&self) -> Option<Vec<f64>> {
        self.source.as_ref().map(|s| {
            self.grid()
                .iter()
                .map(|&x| gaussian_sum(x, &s.centers, &s.amplitudes, &s.widths))
                .collect()
        })
    }

    fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_modes;
        (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * PI * m / self.domain_length
            })
            .collect()
    }

    /// Checks invariants, including mode-wise stability of the scheme for
    /// the linearisation with the largest `χ` treated explicitly.
    pub fn validate(&self) -> Result<(), SimError> {
        let p = &self.params;
        p.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !(self.domain_length >= 6.0 * p.ell) {
            return bad("domain_length must be at least 6 ell");
        }
        if self.n_modes < 16 || self.n_modes % 2 != 0 {
            return bad("n_modes must be even and at least 16");
        }
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.record_dt >= self.dt) {
            return bad("need dt > 0, t_final > 0 and record_dt >= dt");
        }
        let chi = self.chi_profile();
        let chi_max = chi.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let chi_abs = chi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for &k in &self.wavenumbers() {
            let lin = C64::new(-k.powi(4), p.c * k);
            let e = k * k * chi_abs;
            let dt = self.dt;
            let roots: Vec<C64> = match self.scheme {
                Scheme::Imex1 => vec![(1.0 + dt * e) / (1.0 - dt * lin)],
                Scheme::Sbdf2 => {
                    // (3 − 2dt L)ξ² − 4(1 + dt E)ξ + (1 + 2dt E) = 0
                    let a = 3.0 - 2.0 * dt * lin;
                    let b = C64::new(-4.0 * (1.0 + dt * e), 0.0);
                    let cc = C64::new(1.0 + 2.0 * dt * e, 0.0);
                    let disc = (b * b - 4.0 * a * cc).sqrt();
                    vec![(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)]
                }
            };
            let factor = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let allowed = (dt * (-k.powi(4) + chi_max * k * k).max(0.0)).exp() * (1.0 + 2.0 * dt * e.min(1.0));
            if factor > allowed.max(1.0) * (1.0 + 1e-9) && factor > 1.0 {
                return Err(SimError::UnstableTimeStep { dt, k, factor });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Decaying,
    Sustained,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub probe_series: Vec<(f64, f64)>,
    pub mass_series: Vec<(f64, f64)>,
    /// Half the probe range over the trailing 20% of the run.
    pub amplitude: f64,
    /// Angular frequency of the dominant probe oscillation over the trailing 20%.
    pub frequency: f64,
    pub classification: Classification,
    /// Largest `|u(probe)|` over the run.
    pub peak: f64,
    /// Spectral energy fraction in the top third of the resolved modes.
    pub aliasing_fraction: f64,
}

/// Field snapshots written by [`run`] when `save_field_every > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub data: Vec<f64>,
}

struct Spectral {
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut pl = FftPlanner::new();
        let m = 3 * n;
        Self {
            n,
            m,
            fwd: pl.plan_fft_forward(n),
            inv: pl.plan_fft_inverse(n),
            fwd_pad: pl.plan_fft_forward(m),
            inv_pad: pl.plan_fft_inverse(m),
        }
    }

    fn forward(&self, u: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = u.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn inverse(&self, uh: &[C64]) -> Vec<f64> {
        let mut buf = uh.to_vec();
        self.inv.process(&mut buf);
        buf.iter().map(|z| z.re / self.n as f64).collect()
    }

    /// Physical values on the padded grid; the Nyquist mode is dropped.
    fn to_padded(&self, uh: &[C64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let half = n / 2;
        let mut buf = vec![C64::new(0.0, 0.0); m];
        buf[..half].copy_from_slice(&uh[..half]);
        for j in 1..half {
            buf[m - j] = uh[n - j];
        }
        self.inv_pad.process(&mut buf);
        buf.iter().map(|z| z.re / n as f64).collect()
    }

    fn from_padded(&self, v: &[f64]) -> Vec<C64> {
        let (n, m) = (self.n, self.m);
        let half = n / 2;
        let mut buf: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.fwd_pad.process(&mut buf);
        let scale = n as f64 / m as f64;
        let mut out = vec![C64::new(0.0, 0.0); n];
        out[..half].copy_from_slice(&buf[..half]);
        for j in 1..half {
            out[n - j] = buf[m - j];
        }
        out.iter_mut().for_each(|z| *z *= scale);
        out
    }
}

struct Stepper<'a> {
    cfg: &'a SimConfig,
    sp: Spectral,
    k: Vec<f64>,
    lin: Vec<C64>,
    chi: Vec<f64>,
    source_hat: Option<Vec<C64>>,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let sp = Spectral::new(cfg.n_modes);
        let k = cfg.wavenumbers();
        let c = cfg.params.c;
        let lin = k.iter().map(|&k| C64::new(-k.powi(4), c * k)).collect();
        let chi = cfg.chi_profile();
        let source_hat = cfg.source_profile().map(|s| {
            sp.forward(&s).iter().map(|z| z * c).collect()
        });
        Self { cfg, sp, k, lin, chi, source_hat }
    }

    /// Explicit part `k²·(F[χu] + F[γu³ − βu⁵]) + c·F[s]`; the polynomial
    /// terms are evaluated on the padded grid.
    fn explicit(&self, uh: &[C64]) -> Vec<C64> {
        let p = &self.cfg.params;
        let u = self.sp.inverse(uh);
        let chi_u: Vec<f64> = u.iter().zip(&self.chi).map(|(a, b)| a * b).collect();
        let lin_h = self.sp.forward(&chi_u);
        let up = self.sp.to_padded(uh);
        let f: Vec<f64> = up
            .iter()
            .map(|&v| {
                let v2 = v * v;
                p.gamma * v * v2 - p.beta * v * v2 * v2
            })
            .collect();
        let fh = self.sp.from_padded(&f);
        let mut out: Vec<C64> = fh
            .iter()
            .zip(&lin_h)
            .zip(&self.k)
            .map(|((a, b), k)| (a + b) * (k * k))
            .collect();
        if let Some(s) = &self.source_hat {
            for (o, v) in out.iter_mut().zip(s) {
                *o += v;
            }
        }
        out
    }
}

fn chi_at(cfg: &SimConfig, x: f64) -> f64 {
    let p = &cfg.params;
    let ell = p.ell;
    let tol = 1e-12 * cfg.domain_length;
    match &cfg.trigger {
        Trigger::Piecewise => {
            if x.abs() < ell - tol {
                p.chi_plus
            } else if x.abs() > ell + tol {
                p.chi_minus
            } else {
                0.5 * (p.chi_plus + p.chi_minus)
            }
        }
        Trigger::Smoothed { width } => {
            let s = 0.5 * (((x + ell) / width).tanh() - ((x - ell) / width).tanh());
            p.chi_minus + (p.chi_plus - p.chi_minus) * s
        }
        Trigger::GaussianSum { centers, amplitudes, widths } => {
            p.chi_minus + gaussian_sum(x, centers, amplitudes, widths)
        }
    }
}

fn initial_state(cfg: &SimConfig) -> Vec<f64> {
    match cfg.perturbation {
        Perturbation::None => vec![0.0; cfg.n_modes],
        Perturbation::Gaussian { x0, amp, width } => cfg
            .grid()
            .iter()
            .map(|&x| amp * (-(periodic_offset(cfg, x, x0) / width).powi(2)).exp())
            .collect(),
        Perturbation::GaussianDipole { x0, amp, width } => cfg
            .grid()
            .iter()
            .map(|&x| {
                let s = periodic_offset(cfg, x, x0) / width;
                amp * (2.0f64).sqrt() * s * (0.5 - s * s).exp()
            })
            .collect(),
    }
}

/// `x − x0` folded to the nearest periodic image.
fn periodic_offset(cfg: &SimConfig, x: f64, x0: f64) -> f64 {
    let l = cfg.domain_length;
    (x - x0 + l / 2.0).rem_euclid(l) - l / 2.0
}

/// Integrates from `initial` (or the configured perturbation of `u ≡ 0`).
pub fn run(cfg: &SimConfig, initial: Option<&[f64]>) -> Result<(Vec<f64>, Diagnostics), SimError> {
    let (u, d, _) = run_with_field(cfg, initial)?;
    Ok((u, d))
}

/// [`run`] that also returns saved field snapshots.
pub fn run_with_field(
    cfg: &SimConfig,
    initial: Option<&[f64]>,
) -> Result<(Vec<f64>, Diagnostics, Option<FieldRecord>), SimError> {
    cfg.validate()?;
    let st = Stepper::new(cfg);
    let n = cfg.n_modes;
    let u0 = match initial {
        Some(v) => {
            if v.len() != n {
                return Err(SimError::InvalidConfig("initial state length differs from n_modes".into()));
            }
            v.to_vec()
        }
        None => initial_state(cfg),
    };
    let dt = cfg.dt;
    let probe = {
        let g = cfg.grid();
        (0..n).min_by(|&a, &b| (g[a] - cfg.probe_x).abs().total_cmp(&(g[b] - cfg.probe_x).abs())).unwrap()
    };
    let nsteps = (cfg.t_final / dt).round() as usize;
    let rec = ((cfg.record_dt / dt).round() as usize).max(1);
    let mut uh = st.sp.forward(&u0);
    let mut probe_series = vec![(0.0, u0[probe])];
    let mut mass_series = vec![(0.0, uh[0].re / n as f64)];
    let mut field = (cfg.save_field_every > 0).then(|| FieldRecord {
        nx: n,
        dx: cfg.dx(),
        dt: cfg.record_dt * cfg.save_field_every as f64,
        times: vec![0.0],
        data: u0.clone(),
    });
    let mut prev: Option<(Vec<C64>, Vec<C64>)> = None;
    for step in 1..=nsteps {
        let nl = st.explicit(&uh);
        let next: Vec<C64> = match (cfg.scheme, &prev) {
            (Scheme::Sbdf2, Some((u_old, nl_old))) => (0..n)
                .map(|j| {
                    (4.0 * uh[j] - u_old[j] + 2.0 * dt * (2.0 * nl[j] - nl_old[j])) / (3.0 - 2.0 * dt * st.lin[j])
                })
                .collect(),
            _ => (0..n).map(|j| (uh[j] + dt * nl[j]) / (1.0 - dt * st.lin[j])).collect(),
        };
        prev = Some((std::mem::replace(&mut uh, next), nl));
        if step % rec == 0 {
            let t = step as f64 * dt;
            let u = st.sp.inverse(&uh);
            let max = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if !(max <= cfg.blowup_cap) {
                return Err(SimError::BlowupDetected { t, max });
            }
            probe_series.push((t, u[probe]));
            mass_series.push((t, uh[0].re / n as f64));
            if let Some(f) = field.as_mut() {
                if (step / rec) % cfg.save_field_every == 0 {
                    f.times.push(t);
                    f.data.extend_from_slice(&u);
                }
            }
        }
    }
    let energy: f64 = uh.iter().map(|z| z.norm_sqr()).sum();
    let top: f64 = uh
        .iter()
        .zip(&st.k)
        .filter(|(_, k)| k.abs() > 2.0 / 3.0 * PI * n as f64 / cfg.domain_length)
        .map(|(z, _)| z.norm_sqr())
        .sum();
    let u = st.sp.inverse(&uh);
    let (amplitude, frequency) = tail_amplitude_frequency(&probe_series, 0.2);
    let peak = probe_series.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let window = cfg.t_final / 10.0;
    let mut diag = Diagnostics {
        probe_series,
        mass_series,
        amplitude,
        frequency,
        classification: Classification::Indeterminate,
        peak,
        aliasing_fraction: if energy > 0.0 { top / energy } else { 0.0 },
    };
    diag.classification = classify(&diag, window);
    Ok((u, diag, field))
}

/// Half range and mean angular frequency over the trailing `frac` of a series.
pub fn tail_amplitude_frequency(series: &[(f64, f64)], frac: f64) -> (f64, f64) {
    if series.len() < 4 {
        return (0.0, 0.0);
    }
    let t_end = series.last().unwrap().0;
    let t0 = series[0].0;
    let cut = t_end - frac * (t_end - t0);
    let tail: Vec<(f64, f64)> = series.iter().cloned().filter(|p| p.0 >= cut).collect();
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let amplitude = 0.5 * (hi - lo);
    let m = tail.len();
    if m < 4 {
        return (amplitude, 0.0);
    }
    let mean = tail.iter().map(|p| p.1).sum::<f64>() / m as f64;
    // upward mean crossings, linearly interpolated
    let ups: Vec<f64> = tail
        .windows(2)
        .filter(|w| w[0].1 < mean && w[1].1 >= mean)
        .map(|w| w[0].0 + (mean - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
        .collect();
    if ups.len() < 2 {
        return (amplitude, 0.0);
    }
    let period = (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64;
    (amplitude, 2.0 * PI / period)
}

/// Compares consecutive trailing windows of length `window` with the peak.
pub fn classify(diag: &Diagnostics, window: f64) -> Classification {
    let s = &diag.probe_series;
    if s.len() < 2 || !(window > 0.0) {
        return Classification::Indeterminate;
    }
    let (t0, t1) = (s[0].0, s.last().unwrap().0);
    if t1 - t0 < 3.0 * window {
        return Classification::Indeterminate;
    }
    let amp = |a: f64, b: f64| {
        let (lo, hi) = s
            .iter()
            .filter(|p| p.0 > a && p.0 <= b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |m, p| (m.0.min(p.1), m.1.max(p.1)));
        if lo.is_finite() { 0.5 * (hi - lo) } else { 0.0 }
    };
    let last = amp(t1 - window, t1);
    let before = amp(t1 - 2.0 * window, t1 - window);
    let mut peak = 0.0f64;
    let mut a = t0 - 1e-12;
    while a < t1 {
        peak = peak.max(amp(a, a + window));
        a += window;
    }
    if peak == 0.0 {
        return Classification::Decaying;
    }
    if last / peak < 0.01 {
        Classification::Decaying
    } else if (last - before).abs() <= 0.1 * last.max(before) {
        Classification::Sustained
    } else {
        Classification::Indeterminate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub classification: Classification,
}

/// Runs `base` at every speed in `c_values` (in parallel); rows are in input order.
pub fn amplitude_sweep(base: &SimConfig, c_values: &[f64]) -> Result<Vec<SweepRow>, SimError> {
    if c_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::InvalidConfig("c_values must be sorted".into()));
    }
    c_values
        .par_iter()
        .map(|&c| {
            let mut cfg = base.clone();
            cfg.params = cfg.params.with_speed(c);
            let (_, d) = run(&cfg, None)?;
            Ok(SweepRow { c, amplitude: d.amplitude, frequency: d.frequency, classification: d.classification })
        })
        .collect()
}

/// Least-squares slope and intercept of `ln A` against `ln(c* − c)`.
pub fn power_law_fit(c_star: f64, rows: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(c, a)| *c < c_star && *a > 0.0)
        .map(|(c, a)| ((c_star - c).ln(), a.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Steady state of the configured equation by damped pseudo-time relaxation.
///
/// Uses the same splitting as [`run`] with frame speed kept, stopping when
/// the update per unit time falls below `tol`.
pub fn relax_front(cfg: &SimConfig, t_max: f64, tol: f64) -> Result<Vec<f64>, SimError> {
    let mut c = cfg.clone();
    c.perturbation = Perturbation::None;
    c.scheme = Scheme::Imex1;
    c.validate()?;
    let st = Stepper::new(&c);
    let n = c.n_modes;
    let mut uh = vec![C64::new(0.0, 0.0); n];
    let dt = c.dt;
    let steps = (t_max / dt).round() as usize;
    let mut change = f64::INFINITY;
    for _ in 0..steps {
        let nl = st.explicit(&uh);
        let next: Vec<C64> = (0..n).map(|j| (uh[j] + dt * nl[j]) / (1.0 - dt * st.lin[j])).collect();
        change = next.iter().zip(&uh).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / (n as f64 * dt);
        uh = next;
        if change < tol {
            return Ok(st.sp.inverse(&uh));
        }
        if uh.iter().any(|z| !z.re.is_finite()) {
            break;
        }
    }
    Err(SimError::FrontRelaxationFailure(change))
}

/// Relaxes the front for `cfg` (which must carry a source), perturbs it and
/// integrates, returning the space-time field and diagnostics.
pub fn gaussian_trigger_demo(cfg: &SimConfig) -> Result<(FieldRecord, Diagnostics), SimError> {
    if cfg.source.is_none() {
        return Err(SimError::InvalidConfig("the demo needs a source profile".into()));
    }
    let front = relax_front(cfg, 4000.0, 1e-9)?;
    let mut u0 = front;
    let pert = initial_state(cfg);
    for (a, b) in u0.iter_mut().zip(&pert) {
        *a += b;
    }
    let mut c = cfg.clone();
    if c.save_field_every == 0 {
        c.save_field_every = 10;
    }
    let (_, diag, field) = run_with_field(&c, Some(&u0))?;
    Ok((field.expect("field saving enabled"), diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, t: f64) -> Diagnostics {
        let probe_series: Vec<(f64, f64)> = (0..=(t as usize * 4)).map(|i| (i as f64 * 0.25, f(i as f64 * 0.25))).collect();
        Diagnostics {
            probe_series,
            mass_series: vec![],
            amplitude: 0.0,
            frequency: 0.0,
            classification: Classification::Indeterminate,
            peak: 0.0,
            aliasing_fraction: 0.0,
        }
    }

    #[test]
    fn classify_synthetic_series() {
        let d = synthetic(|t| (-0.05 * t).exp() * (1.3 * t).sin(), 400.0);
        assert_eq!(classify(&d, 40.0), Classification::Decaying);
        let d = synthetic(|t| 0.7 * (1.3 * t).sin(), 400.0);
        assert_eq!(classify(&d, 40.0), Classification::Sustained);
        let (a, w) = tail_amplitude_frequency(&d.probe_series, 0.2);
        assert!((a - 0.7).abs() < 1e-2 && (w - 1.3).abs() < 1e-2, "{a} {w}");
        let d = synthetic(|t| 0.1 * t * (1.3 * t).sin(), 400.0);
        assert_eq!(classify(&d, 40.0), Classification::Indeterminate);
    }

    #[test]
    fn power_law_recovers_exponent() {
        let rows: Vec<(f64, f64)> = [0.01, 0.02, 0.04].iter().map(|d: &f64| (1.0 - d, 3.0 * d.powf(0.5))).collect();
        let (s, _) = power_law_fit(1.0, &rows).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }
}
