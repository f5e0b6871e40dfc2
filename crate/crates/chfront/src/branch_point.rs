//! Double roots of the dispersion relation, pinching and the linear spreading speed.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{
    dispersion_dnu, dispersion_dnunu, eval_dispersion, spatial_roots, DispersionError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchError {
    #[error("double-root Newton did not converge after {iterations} iterations (|d| = {residual_d:e}, |d_nu| = {residual_dnu:e})")]
    NoConvergence {
        iterations: usize,
        residual_d: f64,
        residual_dnu: f64,
    },
    #[error("degenerate double root: |d_nunu| = {0:e}")]
    DegenerateDoubleRoot(f64),
    #[error("Re lambda_br does not change sign on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("root tracking ambiguous at t = {t:e}")]
    TrackingAmbiguity { t: f64 },
    #[error("alpha must be positive (got {0})")]
    Domain(f64),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda_br: C64,
    pub nu_br: C64,
    pub c: f64,
    pub chi: f64,
    pub residual_d: f64,
    pub residual_dnu: f64,
    pub pinched: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSpreading {
    pub alpha: f64,
    pub c_lin: f64,
    pub lambda_lin: C64,
    pub mu_lin: f64,
    pub kappa_lin: f64,
}

impl LinearSpreading {
    pub fn nu_lin(&self) -> C64 {
        C64::new(self.mu_lin, self.kappa_lin)
    }
}

/// Closed forms for the pinched double root at the marginal speed,
/// for plateau coefficient `alpha`.
pub fn closed_form_spreading(alpha: f64) -> Result<LinearSpreading, BranchError> {
    if !(alpha > 0.0) {
        return Err(BranchError::Domain(alpha));
    }
    let s7 = 7f64.sqrt();
    let sa = alpha.sqrt();
    Ok(LinearSpreading {
        alpha,
        c_lin: 2.0 / (3.0 * 6f64.sqrt()) * (2.0 + s7) * (s7 - 1.0).sqrt() * alpha * sa,
        lambda_lin: C64::new(0.0, (3.0 + s7) * ((2.0 + s7) / 96.0).sqrt() * alpha * alpha),
        mu_lin: -((s7 - 1.0) / 24.0).sqrt() * sa,
        kappa_lin: ((s7 + 3.0) / 8.0).sqrt() * sa,
    })
}

const MAX_ITER: usize = 50;

/// Newton on `(d, ∂_ν d) = 0` without the pinching classification.
pub fn newton_double_root(
    chi: f64,
    c: f64,
    seed: (C64, C64),
) -> Result<BranchPoint, BranchError> {
    let (mut lambda, mut nu) = seed;
    for it in 0..MAX_ITER {
        let d = eval_dispersion(chi, c, lambda, nu);
        let dn = dispersion_dnu(chi, c, nu);
        let dnn = dispersion_dnunu(chi, nu);
        if dnn.norm() < 1e-6 {
            return Err(BranchError::DegenerateDoubleRoot(dnn.norm()));
        }
        // J = [[−1, d_ν], [0, d_νν]]
        let dnu = -dn / dnn;
        let dlam = d + dn * dnu;
        nu += dnu;
        lambda += dlam;
        let scale = 1.0 + nu.norm() + lambda.norm();
        if dnu.norm() + dlam.norm() < 1e-15 * scale || it + 1 == MAX_ITER {
            let residual_d = eval_dispersion(chi, c, lambda, nu).norm();
            let residual_dnu = dispersion_dnu(chi, c, nu).norm();
            if residual_d < 1e-10 && residual_dnu < 1e-10 {
                return Ok(BranchPoint {
                    lambda_br: lambda,
                    nu_br: nu,
                    c,
                    chi,
                    residual_d,
                    residual_dnu,
                    pinched: false,
                });
            }
            if it + 1 == MAX_ITER {
                return Err(BranchError::NoConvergence {
                    iterations: MAX_ITER,
                    residual_d,
                    residual_dnu,
                });
            }
        }
    }
    unreachable!()
}

/// Newton on the double-root system, then the pinching classification.
pub fn find_double_root(chi: f64, c: f64, seed: (C64, C64)) -> Result<BranchPoint, BranchError> {
    let mut bp = newton_double_root(chi, c, seed)?;
    bp.pinched = pinching_check(&bp)?;
    Ok(bp)
}

/// Fastest-growing-mode seed `(λ, ν)` for the complex double root with `Im ν > 0`.
pub fn heuristic_seed(chi: f64, c: f64) -> (C64, C64) {
    let k = (chi.abs() / 2.0).sqrt().max(1e-3);
    let nu = C64::new(0.0, k);
    (-eval_dispersion(chi, c, C64::new(0.0, 0.0), nu), nu)
}

fn canonical(mut bp: BranchPoint) -> BranchPoint {
    if bp.nu_br.im < 0.0 {
        bp.nu_br = bp.nu_br.conj();
        bp.lambda_br = bp.lambda_br.conj();
    }
    bp
}

/// Complex branch point at speed `c`, continued from the heuristic seed at a
/// reference speed proportional to `chi^{3/2}`.
pub fn track_branch_point(chi: f64, c: f64) -> Result<BranchPoint, BranchError> {
    let c0 = 1.5 * chi.abs().powf(1.5);
    let mut bp = canonical(newton_double_root(chi, c0, heuristic_seed(chi, c0))?);
    let n = ((c - c0).abs() / (0.05 * chi.abs().powf(1.5).max(0.05))).ceil().max(1.0) as usize;
    for i in 1..=n {
        let ci = c0 + (c - c0) * i as f64 / n as f64;
        bp = canonical(newton_double_root(chi, ci, (bp.lambda_br, bp.nu_br))?);
    }
    bp.pinched = pinching_check(&bp)?;
    Ok(bp)
}

/// Marginal speed where the pinched branch point has `Re λ_br = 0`.
///
/// The plateau coefficient entering the dispersion relation is `chi·alpha`.
pub fn find_spreading_speed(chi: f64, alpha: f64) -> Result<LinearSpreading, BranchError> {
    if !(alpha > 0.0) {
        return Err(BranchError::Domain(alpha));
    }
    let a = chi * alpha;
    let unit = a.abs().powf(1.5);
    let c0 = 1.5 * unit;
    let solve = |c: f64, seed: (C64, C64)| -> Result<BranchPoint, BranchError> {
        Ok(canonical(newton_double_root(a, c, seed)?))
    };
    let start = solve(c0, heuristic_seed(a, c0))?;

    // march outward from c0 until Re λ_br changes sign
    let step = 0.05 * unit;
    let (lo_lim, hi_lim) = (0.3 * unit, 4.0 * unit);
    let mut bracket = None;
    for dir in [1.0, -1.0] {
        let mut prev = start;
        let mut c = c0;
        while bracket.is_none() {
            let cn = c + dir * step;
            if cn < lo_lim || cn > hi_lim {
                break;
            }
            let next = solve(cn, (prev.lambda_br, prev.nu_br))?;
            if prev.lambda_br.re.signum() != next.lambda_br.re.signum() {
                bracket = Some(if dir > 0.0 { (prev, next) } else { (next, prev) });
            }
            prev = next;
            c = cn;
        }
        if start.lambda_br.re == 0.0 {
            bracket = Some((start, start));
        }
        if bracket.is_some() {
            break;
        }
    }
    let (mut lo, mut hi) = bracket.ok_or(BranchError::BracketFailure {
        lo: lo_lim,
        hi: hi_lim,
    })?;

    // Illinois regula falsi on c ↦ Re λ_br(c)
    let mut side = 0i32;
    let mut best = if lo.lambda_br.re.abs() < hi.lambda_br.re.abs() { lo } else { hi };
    for _ in 0..200 {
        if best.lambda_br.re.abs() < 1e-13 * (1.0 + best.lambda_br.norm()) || (hi.c - lo.c).abs() < 1e-15 * hi.c {
            break;
        }
        let (fl, fh) = (lo.lambda_br.re, hi.lambda_br.re);
        let (wl, wh) = match side {
            1 => (0.5, 1.0),
            -1 => (1.0, 0.5),
            _ => (1.0, 1.0),
        };
        let mut cm = (lo.c * fh * wh - hi.c * fl * wl) / (fh * wh - fl * wl);
        if !(cm > lo.c.min(hi.c) && cm < lo.c.max(hi.c)) {
            cm = 0.5 * (lo.c + hi.c);
        }
        let seed = if (cm - lo.c).abs() < (cm - hi.c).abs() { lo } else { hi };
        let mid = solve(cm, (seed.lambda_br, seed.nu_br))?;
        if mid.lambda_br.re.signum() == lo.lambda_br.re.signum() {
            lo = mid;
            side = if side == -1 { 0 } else { -1 };
        } else {
            hi = mid;
            side = if side == 1 { 0 } else { 1 };
        }
        if mid.lambda_br.re.abs() < best.lambda_br.re.abs() {
            best = mid;
        }
    }
    if !(best.lambda_br.re.abs() < 1e-10) {
        return Err(BranchError::BracketFailure { lo: lo.c, hi: hi.c });
    }
    Ok(LinearSpreading {
        alpha,
        c_lin: best.c,
        lambda_lin: best.lambda_br,
        mu_lin: best.nu_br.re,
        kappa_lin: best.nu_br.im,
    })
}

/// Follows the two roots that collide at the branch point along `λ_br + t`,
/// `t ∈ [0, T]`, and reports whether they end up on opposite sides of the
/// imaginary axis.
pub fn pinching_check(bp: &BranchPoint) -> Result<bool, BranchError> {
    let (chi, c) = (bp.chi, bp.c);
    let dnn = dispersion_dnunu(chi, bp.nu_br);
    if dnn.norm() < 1e-6 {
        return Err(BranchError::DegenerateDoubleRoot(dnn.norm()));
    }
    let t_large = 100.0 * bp.lambda_br.norm().max(1.0);
    let split = 1e-4 * (1.0 + bp.nu_br.norm());
    let t0 = 0.5 * split * split * dnn.norm();
    let n_steps = 10_000;
    let ratio = (t_large / t0).powf(1.0 / n_steps as f64);

    // second-order splitting ν_br ± sqrt(2t/d_νν) at the first step
    let delta = (2.0 * t0 / dnn).sqrt();
    let mut tracked = [bp.nu_br + delta, bp.nu_br - delta];
    let mut t = t0;
    for step in 0..=n_steps {
        if step > 0 {
            t *= ratio;
        }
        let roots = spatial_roots(chi, c, bp.lambda_br + t)?.nu;
        let mut used = [false; 4];
        for tr in tracked.iter_mut() {
            let mut d: Vec<(f64, usize)> = roots
                .iter()
                .enumerate()
                .map(|(i, &z)| ((z - *tr).norm(), i))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (d1, i1) = d[0];
            let d2 = d[1].0;
            if used[i1] || d1 >= 0.5 * d2 {
                return Err(BranchError::TrackingAmbiguity { t });
            }
            used[i1] = true;
            *tr = roots[i1];
        }
    }
    Ok((tracked[0].re > 0.0) != (tracked[1].re > 0.0))
}

/// Real double root `4ν³ + 2χν = c` (the non-pinched collision for `χ > 0`).
pub fn real_double_root(chi: f64, c: f64) -> Result<BranchPoint, BranchError> {
    let mut nu = (c / 4.0).cbrt();
    for _ in 0..100 {
        let f = 4.0 * nu * nu * nu + 2.0 * chi * nu - c;
        let fp = 12.0 * nu * nu + 2.0 * chi;
        let step = f / fp;
        nu -= step;
        if step.abs() < 1e-16 * (1.0 + nu.abs()) {
            break;
        }
    }
    let nu = C64::new(nu, 0.0);
    let lambda = eval_dispersion(chi, c, C64::new(0.0, 0.0), nu);
    find_double_root(chi, c, (lambda, nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    // extended-precision values of the closed forms at α = 1
    const C_LIN: f64 = 1.622_075_925_917_433_38;
    const LAMBDA_LIN_IM: f64 = 1.241_978_582_367_870_62;
    const MU_LIN: f64 = -0.261_864_413_951_873_081;
    const KAPPA_LIN: f64 = 0.840_070_779_091_305_987;

    #[test]
    fn closed_form_values_match_extended_precision() {
        let ls = closed_form_spreading(1.0).unwrap();
        assert!((ls.c_lin - C_LIN).abs() < 1e-15);
        assert!((ls.lambda_lin.im - LAMBDA_LIN_IM).abs() < 1e-15);
        assert_eq!(ls.lambda_lin.re, 0.0);
        assert!((ls.mu_lin - MU_LIN).abs() < 1e-15);
        assert!((ls.kappa_lin - KAPPA_LIN).abs() < 1e-15);
        let r1 = eval_dispersion(1.0, ls.c_lin, ls.lambda_lin, ls.nu_lin()).norm();
        let r2 = dispersion_dnu(1.0, ls.c_lin, ls.nu_lin()).norm();
        assert!(r1 < 1e-12 && r2 < 1e-12, "{r1:e} {r2:e}");
    }

    #[test]
    fn closed_form_scaling() {
        let a = closed_form_spreading(1.0).unwrap();
        let b = closed_form_spreading(4.0).unwrap();
        assert!((b.c_lin - 8.0 * a.c_lin).abs() < 1e-13);
        assert!((b.lambda_lin - 16.0 * a.lambda_lin).norm() < 1e-13);
        assert!((b.mu_lin - 2.0 * a.mu_lin).abs() < 1e-15);
        assert!(closed_form_spreading(0.0).is_err());
        let s7 = 7f64.sqrt();
        assert!((a.mu_lin + ((s7 - 1.0) / 24.0).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn newton_recovers_closed_form_from_perturbed_seed() {
        let ls = closed_form_spreading(1.0).unwrap();
        let seed = (ls.lambda_lin + C64::new(1e-3, -1e-3), ls.nu_lin() + C64::new(1e-3, 1e-3));
        let bp = find_double_root(1.0, ls.c_lin, seed).unwrap();
        assert!((bp.lambda_br - ls.lambda_lin).norm() < 1e-9);
        assert!((bp.nu_br - ls.nu_lin()).norm() < 1e-9);
        assert!(bp.pinched);
    }

    #[test]
    fn conjugate_seed_gives_conjugate_point() {
        let ls = closed_form_spreading(1.0).unwrap();
        let c = ls.c_lin + 0.03;
        let a = newton_double_root(1.0, c, (ls.lambda_lin, ls.nu_lin())).unwrap();
        let b = newton_double_root(1.0, c, (ls.lambda_lin.conj(), ls.nu_lin().conj())).unwrap();
        assert!((a.lambda_br - b.lambda_br.conj()).norm() < 1e-14);
        assert!((a.nu_br - b.nu_br.conj()).norm() < 1e-14);
    }

    #[test]
    fn faster_frame_stabilises_branch_point() {
        let ls = closed_form_spreading(1.0).unwrap();
        let bp = track_branch_point(1.0, ls.c_lin + 0.05).unwrap();
        assert!(bp.lambda_br.re < 0.0);
        assert!(bp.pinched);
    }

    #[test]
    fn spreading_speed_matches_closed_form() {
        for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let ls = find_spreading_speed(1.0, alpha).unwrap();
            let cf = closed_form_spreading(alpha).unwrap();
            assert!((ls.c_lin - cf.c_lin).abs() < 1e-8 * cf.c_lin, "alpha {alpha}");
            assert!((ls.lambda_lin - cf.lambda_lin).norm() < 1e-8 * cf.lambda_lin.norm());
            assert!((ls.mu_lin - cf.mu_lin).abs() < 1e-8 * cf.mu_lin.abs());
            assert!((ls.kappa_lin - cf.kappa_lin).abs() < 1e-8 * cf.kappa_lin);
        }
        let half = find_spreading_speed(1.0, 0.5).unwrap();
        assert!((half.c_lin - 0.573_490_4).abs() < 1e-6);
    }

    #[test]
    fn re_lambda_br_decreases_with_speed() {
        let ls = closed_form_spreading(1.0).unwrap();
        let h = 1e-4;
        let a = track_branch_point(1.0, ls.c_lin - h).unwrap();
        let b = track_branch_point(1.0, ls.c_lin + h).unwrap();
        assert!(b.lambda_br.re < a.lambda_br.re);
    }

    #[test]
    fn real_collision_is_not_pinched() {
        let bp = real_double_root(1.0, 0.5).unwrap();
        assert!(bp.lambda_br.im.abs() < 1e-14 && bp.lambda_br.re > 0.0);
        assert!(!bp.pinched);
    }
}
