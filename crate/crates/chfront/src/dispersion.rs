//! Constant-coefficient dispersion relation, spatial roots and Fredholm borders.
//!
//! For a plateau value `chi` and frame speed `c` the linearisation about
//! `u ≡ 0` has the dispersion relation
//! `d(λ, ν) = −ν⁴ − χν² + cν − λ`.

use nalgebra::{Matrix4, Schur};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evans;

/// Default relative residual accepted for a polished root.
pub const TOL_ROOT: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("root polishing failed: relative residual {residual:e} at lambda = {lambda}")]
    RootSolveFailure { lambda: C64, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),
}

/// Physical and geometric constants of the trigger-front model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Linear coefficient on the plateau `|x| ≤ ell`.
    pub chi_plus: f64,
    /// Linear coefficient outside the plateau.
    pub chi_minus: f64,
    /// Cubic coefficient.
    pub gamma: f64,
    /// Quintic coefficient.
    pub beta: f64,
    /// Plateau half-length.
    pub ell: f64,
    /// Frame speed.
    pub c: f64,
    /// Exponential weight rate.
    pub eta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            chi_plus: 1.0,
            chi_minus: -1.0,
            gamma: -1.0,
            beta: 1.0,
            ell: 20.0,
            c: 1.622_075_925_917_433_4,
            eta: 0.0,
        }
    }
}

impl ModelParams {
    pub fn with_speed(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_ell(mut self, ell: f64) -> Self {
        self.ell = ell;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Checks the hard invariants. On success returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, DispersionError> {
        let mut bad = Vec::new();
        let all = [
            ("chi_plus", self.chi_plus),
            ("chi_minus", self.chi_minus),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("ell", self.ell),
            ("c", self.c),
            ("eta", self.eta),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite"));
            }
        }
        if !(self.beta > 0.0) {
            bad.push(format!("beta > 0 required (got {})", self.beta));
        }
        if !(self.ell > 0.0) {
            bad.push(format!("ell > 0 required (got {})", self.ell));
        }
        if !(self.c > 0.0) {
            bad.push(format!("c > 0 required (got {})", self.c));
        }
        if !(self.eta >= 0.0) {
            bad.push(format!("eta >= 0 required (got {})", self.eta));
        }
        if !bad.is_empty() {
            return Err(DispersionError::InvalidParams(bad));
        }
        let mut warn = Vec::new();
        if !(self.chi_plus > 0.0 && self.chi_minus < 0.0) {
            warn.push(format!(
                "chi_plus > 0 > chi_minus expected for the trigger example (got {}, {})",
                self.chi_plus, self.chi_minus
            ));
        }
        Ok(warn)
    }
}

/// `d(λ, ν) = −ν⁴ − χν² + cν − λ`.
pub fn eval_dispersion(chi: f64, c: f64, lambda: C64, nu: C64) -> C64 {
    let nu2 = nu * nu;
    -nu2 * nu2 - chi * nu2 + c * nu - lambda
}

/// `∂_ν d`.
pub fn dispersion_dnu(chi: f64, c: f64, nu: C64) -> C64 {
    -4.0 * nu * nu * nu - 2.0 * chi * nu + c
}

/// `∂²_ν d`.
pub fn dispersion_dnunu(chi: f64, nu: C64) -> C64 {
    -12.0 * nu * nu - 2.0 * chi
}

/// Four spatial roots of `d(λ, ·)` sorted by descending real part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialRootSet {
    pub lambda: C64,
    pub chi: f64,
    pub c: f64,
    pub nu: [C64; 4],
    pub morse_index: usize,
}

impl SpatialRootSet {
    /// Largest relative residual over the four roots.
    pub fn max_residual(&self) -> f64 {
        self.nu
            .iter()
            .map(|&z| relative_residual(self.chi, self.c, self.lambda, z))
            .fold(0.0, f64::max)
    }
}

/// `|p(ν)| / Σ|a_k||ν|^k` for the monic quartic `ν⁴ + χν² − cν + λ`.
pub fn relative_residual(chi: f64, c: f64, lambda: C64, nu: C64) -> f64 {
    let r = nu.norm();
    let scale = r.powi(4) + chi.abs() * r * r + c.abs() * r + lambda.norm();
    let p = -eval_dispersion(chi, c, lambda, nu);
    if scale == 0.0 {
        p.norm()
    } else {
        p.norm() / scale
    }
}

fn tie_tol(a: C64, b: C64) -> f64 {
    1e-13 * (1.0 + a.norm().max(b.norm()))
}

/// `a` sorts before `b`: larger real part first, near-ties by larger imaginary part.
fn precedes(a: C64, b: C64) -> bool {
    if (a.re - b.re).abs() <= tie_tol(a, b) {
        a.im > b.im
    } else {
        a.re > b.re
    }
}

/// Sorts four roots in place by the root-set ordering.
pub fn order_roots(nu: &mut [C64; 4]) {
    for i in 1..4 {
        let mut j = i;
        while j > 0 && precedes(nu[j], nu[j - 1]) {
            nu.swap(j, j - 1);
            j -= 1;
        }
    }
}

fn companion_roots(chi: f64, c: f64, lambda: C64) -> Option<[C64; 4]> {
    // monic ν⁴ + 0ν³ + χν² − cν + λ
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let m = Matrix4::new(
        z, z, z, -lambda,
        one, z, z, C64::new(c, 0.0),
        z, one, z, C64::new(-chi, 0.0),
        z, z, one, z,
    );
    let schur = Schur::try_new(m, 1e-15, 2000)?;
    let ev = schur.eigenvalues()?;
    Some([ev[0], ev[1], ev[2], ev[3]])
}

fn polish(chi: f64, c: f64, lambda: C64, nu: C64) -> C64 {
    let step = |z: C64| {
        let dn = dispersion_dnu(chi, c, z);
        if dn.norm() == 0.0 {
            z
        } else {
            z - eval_dispersion(chi, c, lambda, z) / dn
        }
    };
    let z1 = step(nu);
    let r0 = relative_residual(chi, c, lambda, nu);
    let r1 = relative_residual(chi, c, lambda, z1);
    let mut best = if r1.is_finite() && r1 <= r0 { z1 } else { nu };
    let mut rb = r0.min(r1);
    // near multiple roots one step may not reach tolerance; allow a few more
    let mut k = 0;
    while rb >= TOL_ROOT && k < 4 {
        let z = step(best);
        let r = relative_residual(chi, c, lambda, z);
        if !(r < rb) {
            break;
        }
        best = z;
        rb = r;
        k += 1;
    }
    best
}

/// Spatial roots of `d(λ, ·) = 0` with descending-real-part ordering.
pub fn spatial_roots(chi: f64, c: f64, lambda: C64) -> Result<SpatialRootSet, DispersionError> {
    let raw = companion_roots(chi, c, lambda).ok_or(DispersionError::RootSolveFailure {
        lambda,
        residual: f64::INFINITY,
    })?;
    let mut nu = raw.map(|z| polish(chi, c, lambda, z));
    order_roots(&mut nu);
    let set = SpatialRootSet {
        lambda,
        chi,
        c,
        nu,
        morse_index: nu.iter().filter(|z| z.re > 0.0).count(),
    };
    let residual = set.max_residual();
    if !(residual < TOL_ROOT) {
        return Err(DispersionError::RootSolveFailure { lambda, residual });
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    /// Sign of the weight shift: the `plus` border uses `ν = ik − η`.
    pub fn weight_sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Samples `(k, λ(k))` of a Fredholm border.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub samples: Vec<(f64, C64)>,
    pub side: Side,
    pub chi: f64,
    pub eta: f64,
}

/// `λ(k) = −ν⁴ − χν² + cν` at `ν = ik − s·η`.
pub fn border_point(side: Side, chi: f64, c: f64, eta: f64, k: f64) -> C64 {
    let nu = C64::new(-side.weight_sign() * eta, k);
    eval_dispersion(chi, c, C64::new(0.0, 0.0), nu)
}

pub fn essential_curve(side: Side, chi: f64, c: f64, eta: f64, k_grid: &[f64]) -> SpectrumCurve {
    SpectrumCurve {
        samples: k_grid
            .iter()
            .map(|&k| (k, border_point(side, chi, c, eta, k)))
            .collect(),
        side,
        chi,
        eta,
    }
}

/// Distance from `lambda` to the border curve, by dense sampling plus golden refinement.
pub fn distance_to_border(side: Side, chi: f64, c: f64, eta: f64, lambda: C64) -> f64 {
    let kmax = 2.0 * (lambda.norm() + c.abs() + chi * chi + eta.powi(4) + 10.0).powf(0.25);
    let n = 4001;
    let f = |k: f64| (border_point(side, chi, c, eta, k) - lambda).norm();
    let dk = 2.0 * kmax / (n - 1) as f64;
    let mut best = (f(-kmax), -kmax);
    for i in 1..n {
        let k = -kmax + dk * i as f64;
        let v = f(k);
        if v < best.0 {
            best = (v, k);
        }
    }
    let (mut a, mut b) = (best.1 - dk, best.1 + dk);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.0.min(f(0.5 * (a + b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceThresholds {
    pub min_border_distance: f64,
    pub min_determinant: f64,
}

impl Default for ResonanceThresholds {
    fn default() -> Self {
        Self {
            min_border_distance: 1e-3,
            min_determinant: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEntry {
    pub k: i32,
    pub lambda: C64,
    pub dist_plus: f64,
    pub dist_minus: f64,
    /// Modulus of the scaled plateau determinant; `None` when `λ` is too close to a border to evaluate.
    pub determinant: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub omega_star: f64,
    pub entries: Vec<ResonanceEntry>,
    pub pass: bool,
}

impl ResonanceReport {
    pub fn flagged(&self) -> Vec<i32> {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.k).collect()
    }
}

/// Checks that `ikω*` for `2 ≤ |k| ≤ k_max` avoids the borders and the point spectrum.
pub fn check_no_resonance(
    params: &ModelParams,
    omega_star: f64,
    k_max: i32,
) -> Result<ResonanceReport, crate::Error> {
    check_no_resonance_with(params, omega_star, k_max, ResonanceThresholds::default())
}

pub fn check_no_resonance_with(
    params: &ModelParams,
    omega_star: f64,
    k_max: i32,
    th: ResonanceThresholds,
) -> Result<ResonanceReport, crate::Error> {
    if omega_star == 0.0 || k_max < 2 {
        return Err(DispersionError::Precondition(format!(
            "need omega_star != 0 and k_max >= 2 (got {omega_star}, {k_max})"
        ))
        .into());
    }
    let mut entries = Vec::new();
    for k in (-k_max..=k_max).filter(|k| k.abs() >= 2) {
        let lambda = C64::new(0.0, k as f64 * omega_star);
        let dp = distance_to_border(Side::Plus, params.chi_plus, params.c, params.eta, lambda);
        let dm = distance_to_border(Side::Minus, params.chi_minus, params.c, params.eta, lambda);
        let near = dp.min(dm) < th.min_border_distance;
        let determinant = if near {
            None
        } else {
            Some(evans::plateau_determinant(params, lambda)?.value.norm())
        };
        let pass = !near && determinant.is_some_and(|d| d > th.min_determinant);
        entries.push(ResonanceEntry {
            k,
            lambda,
            dist_plus: dp,
            dist_minus: dm,
            determinant,
            pass,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(ResonanceReport {
        omega_star,
        entries,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dispersion_vanishes_at_origin() {
        assert_eq!(eval_dispersion(1.0, 1.0, c(0.0, 0.0), c(0.0, 0.0)), c(0.0, 0.0));
    }

    #[test]
    fn far_right_morse_index_is_two() {
        for chi in [1.0, -1.0] {
            let r = spatial_roots(chi, 1.0, c(100.0, 3.0)).unwrap();
            assert_eq!(r.morse_index, 2);
        }
    }

    #[test]
    fn zero_lambda_has_zero_root_and_cubic_factor() {
        let r = spatial_roots(-1.0, 1.0, c(0.0, 0.0)).unwrap();
        assert!(r.nu.iter().any(|z| z.norm() < 1e-12));
        // −ν³ + ν + 1 = 0 has the real root 1.324717957244746 (plastic number)
        assert!(r.nu.iter().any(|z| (z - c(1.324_717_957_244_746, 0.0)).norm() < 1e-12));
        // the complex pair: −ρ/2 ± i·sqrt(3ρ²/4 − 1)
        let rho = 1.324_717_957_244_746_f64;
        let im = (0.75 * rho * rho - 1.0).sqrt();
        assert!(r.nu.iter().any(|z| (z - c(-rho / 2.0, im)).norm() < 1e-12));
        assert!(r.nu.iter().any(|z| (z - c(-rho / 2.0, -im)).norm() < 1e-12));
    }

    #[test]
    fn ordering_breaks_ties_by_imaginary_part() {
        let mut v = [c(-1.0, -2.0), c(-1.0, 2.0), c(3.0, 0.0), c(0.0, 0.0)];
        order_roots(&mut v);
        assert_eq!(v, [c(3.0, 0.0), c(0.0, 0.0), c(-1.0, 2.0), c(-1.0, -2.0)]);
    }

    #[test]
    fn border_examples() {
        assert_eq!(border_point(Side::Minus, -1.0, 1.0, 0.0, 0.0), c(0.0, 0.0));
        let l = border_point(Side::Plus, 1.0, 1.0, 0.0, 1.0);
        assert!((l - c(0.0, 1.0)).norm() < 1e-15);
        for k in [-3.0, -0.5, 0.2, 1.7] {
            assert!(border_point(Side::Minus, -1.0, 2.0, 0.0, k).re <= 0.0);
        }
    }

    #[test]
    fn weighted_border_satisfies_dispersion() {
        let (chi, cc, eta) = (1.0, 1.3, 0.2);
        for side in [Side::Plus, Side::Minus] {
            for k in [-1.0, 0.0, 0.4, 2.0] {
                let l = border_point(side, chi, cc, eta, k);
                let nu = c(-side.weight_sign() * eta, k);
                assert!(eval_dispersion(chi, cc, l, nu).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn validate_lists_every_violation() {
        let p = ModelParams {
            ell: -1.0,
            c: 0.0,
            ..ModelParams::default()
        };
        match p.validate() {
            Err(DispersionError::InvalidParams(v)) => {
                assert_eq!(v.len(), 2);
                assert!(v[0].contains("ell > 0"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
