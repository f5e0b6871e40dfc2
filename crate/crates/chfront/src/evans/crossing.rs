//! Location of the first Hopf crossing of the plateau eigenvalues.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{plateau_derivative, EvansError, Param};
use crate::branch_point::closed_form_spreading;
use crate::dispersion::{spatial_roots, ModelParams};

/// Tolerance on `|Re λ*|` at the crossing speed.
pub const TOL_CROSS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingData {
    pub ell: f64,
    pub c_star: f64,
    pub lambda_star: C64,
    #[serde(rename = "dRe_dc")]
    pub d_re_dc: f64,
    pub simple: bool,
}

fn spreading(alpha: f64) -> Result<crate::branch_point::LinearSpreading, EvansError> {
    closed_form_spreading(alpha).map_err(|e| EvansError::Precondition(e.to_string()))
}

/// Leading corrections `(ĉ, λ̂)` to `(c_lin, λ_lin)` for plateau half-length `ell`.
///
/// Obtained by solving `λ̂ − ν_lin ĉ = (6ν_lin² + α)·π²/(4ℓ²)` for real `ĉ`
/// and imaginary `λ̂`.
pub fn expansion_crossing(ell: f64, alpha: f64) -> (f64, C64) {
    let ls = closed_form_spreading(alpha).expect("alpha > 0");
    let (mu, ka) = (ls.mu_lin, ls.kappa_lin);
    let p = PI * PI / (4.0 * ell * ell);
    let c_hat = -p / mu * (alpha + 6.0 * (mu * mu - ka * ka));
    let lam_hat = C64::new(0.0, ka * p / mu * (-alpha + 6.0 * (mu * mu + ka * ka)));
    (c_hat, lam_hat)
}

/// Variant of the closed form that lacks the factor `κ_lin` in `λ̂`.
pub fn expansion_crossing_uncorrected(ell: f64, alpha: f64) -> (f64, C64) {
    let ls = closed_form_spreading(alpha).expect("alpha > 0");
    let (mu, ka) = (ls.mu_lin, ls.kappa_lin);
    let p = PI * PI / (4.0 * mu * ell * ell);
    let lam_hat = C64::new(0.0, p * (-1.0 + 6.0 * (mu * mu + ka * ka)));
    let c_hat = -p * (1.0 + 6.0 * (mu * mu - ka * ka));
    (c_hat, lam_hat)
}

fn sigma0(params: &ModelParams, lambda: C64) -> Result<C64, EvansError> {
    let r = spatial_roots(params.chi_plus, params.c, lambda)?.nu;
    Ok(r[0] + r[1])
}

/// Newton on the matching determinant in `λ` at fixed speed.
pub fn eigenvalue_near(params: &ModelParams, seed: C64) -> Result<C64, EvansError> {
    let mut lambda = seed;
    for _ in 0..100 {
        let s0 = sigma0(params, lambda)?;
        let (f, fp) = plateau_derivative(params, lambda, Param::Lambda, s0)?;
        if fp.norm() == 0.0 {
            return Err(EvansError::NotSimple(lambda));
        }
        let mut step = f / fp;
        let cap = 0.1;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        lambda -= step;
        if step.norm() < 1e-14 * (1.0 + lambda.norm()) {
            return Ok(lambda);
        }
    }
    Err(EvansError::NoConvergence(format!("eigenvalue Newton from {seed}")))
}

/// Simple-zero test: the linearisation predicts `|f|` on a small circle.
fn is_simple(params: &ModelParams, lambda: C64) -> Result<bool, EvansError> {
    let s0 = sigma0(params, lambda)?;
    let (_, fp) = plateau_derivative(params, lambda, Param::Lambda, s0)?;
    let delta = 1e-4 * (1.0 + lambda.norm());
    for k in 0..4 {
        let z = lambda + C64::from_polar(delta, k as f64 * PI / 2.0 + 0.3);
        let (f, _) = plateau_derivative(params, z, Param::Lambda, s0)?;
        let ratio = fp.norm() * delta / f.norm();
        if !(ratio > 0.5 && ratio < 2.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Newton on `(ω, c)` for `D(iω, c) = 0` from the given seed.
pub fn find_hopf_crossing_from(
    params: &ModelParams,
    omega_seed: f64,
    c_seed: f64,
) -> Result<CrossingData, EvansError> {
    let (mut omega, mut c) = (omega_seed, c_seed);
    let mut converged = false;
    for _ in 0..100 {
        let p = params.with_speed(c);
        let lambda = C64::new(0.0, omega);
        let s0 = sigma0(&p, lambda)?;
        let (f, fl) = plateau_derivative(&p, lambda, Param::Lambda, s0)?;
        let (_, fc) = plateau_derivative(&p, lambda, Param::Speed, s0)?;
        let fw = C64::new(0.0, 1.0) * fl;
        // [[Re fw, Re fc], [Im fw, Im fc]] (dω, dc) = −(Re f, Im f)
        let det = fw.re * fc.im - fc.re * fw.im;
        if det == 0.0 || !det.is_finite() {
            return Err(EvansError::NotSimple(lambda));
        }
        let mut dw = (-f.re * fc.im + fc.re * f.im) / det;
        let mut dc = (-fw.re * f.im + fw.im * f.re) / det;
        let size = dw.abs().max(dc.abs());
        if size > 0.05 {
            dw *= 0.05 / size;
            dc *= 0.05 / size;
        }
        omega += dw;
        c += dc;
        if !(c > 0.0) {
            return Err(EvansError::NoConvergence(format!("speed left c > 0 (c = {c})")));
        }
        if dw.abs() + dc.abs() < 1e-14 * (1.0 + omega.abs() + c) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EvansError::NoConvergence("crossing Newton on (omega, c)".into()));
    }
    let p = params.with_speed(c);
    let lambda_star = eigenvalue_near(&p, C64::new(0.0, omega))?;
    if lambda_star.re.abs() > TOL_CROSS {
        return Err(EvansError::NoConvergence(format!(
            "Re lambda* = {:e} at the located speed",
            lambda_star.re
        )));
    }
    if !is_simple(&p, lambda_star)? {
        return Err(EvansError::NotSimple(lambda_star));
    }
    let h = 1e-5;
    let up = eigenvalue_near(&params.with_speed(c + h), lambda_star)?;
    let dn = eigenvalue_near(&params.with_speed(c - h), lambda_star)?;
    Ok(CrossingData {
        ell: params.ell,
        c_star: c,
        lambda_star,
        d_re_dc: (up.re - dn.re) / (2.0 * h),
        simple: true,
    })
}

/// First crossing speed and eigenvalue for `params.ell`; `params.c` is ignored.
///
/// Seeded by the large-plateau expansion. Below `ℓ = 25` the solution is
/// continued down from `ℓ = 30` so the first mode is followed.
pub fn find_hopf_crossing(params: &ModelParams) -> Result<CrossingData, EvansError> {
    let alpha = params.chi_plus;
    let ls = spreading(alpha)?;
    let predict = |ell: f64| {
        let (ch, lh) = expansion_crossing(ell, alpha);
        ((ls.lambda_lin + lh).im, ls.c_lin + ch)
    };
    let target = params.ell;
    if !(target > 0.0) {
        return Err(EvansError::Precondition("ell > 0".into()));
    }
    let start = if target >= 25.0 { target } else { 30.0 };
    let (w0, c0) = predict(start);
    let mut cur = find_hopf_crossing_from(&params.with_ell(start), w0, c0)?;
    let mut ell = start;
    while ell > target {
        let next = (0.9 * ell).max(target);
        let (wa, ca) = predict(ell);
        let (wb, cb) = predict(next);
        cur = find_hopf_crossing_from(
            &params.with_ell(next),
            cur.lambda_star.im + (wb - wa),
            cur.c_star + (cb - ca),
        )?;
        ell = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncorrected_expansion_values() {
        let (ch, lh) = expansion_crossing_uncorrected(20.0, 1.0);
        assert!((ch + 0.066_495_924_296_079_469).abs() < 1e-12);
        assert!((lh.im + 0.085_879_660_589_290_160).abs() < 1e-12);
        let (ch2, lh2) = expansion_crossing_uncorrected(40.0, 1.0);
        assert!((ch / ch2 - 4.0).abs() < 1e-12 && (lh.im / lh2.im - 4.0).abs() < 1e-12);
        assert!(ch < 0.0);
    }

    #[test]
    fn corrected_expansion_differs_by_kappa() {
        let ls = closed_form_spreading(1.0).unwrap();
        let (ch, lh) = expansion_crossing(20.0, 1.0);
        let (cv, lv) = expansion_crossing_uncorrected(20.0, 1.0);
        assert!((ch - cv).abs() < 1e-15);
        assert!((lh.im - ls.kappa_lin * lv.im).abs() < 1e-15);
    }
}
