//! Continuation of the absolute spectrum from a pinched branch point.
//!
//! A point of the absolute spectrum is a `λ` where the second and third
//! spatial roots share their real part, i.e. `d(λ, ν) = d(λ, ν + iγ) = 0`
//! for some real separation `γ`. The curve is followed in `γ` starting from
//! the branch point at `γ = 0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch_point::{track_branch_point, BranchError, BranchPoint};
use crate::dispersion::{dispersion_dnu, dispersion_dnunu, eval_dispersion, spatial_roots, DispersionError};

pub const TOL_ABS: f64 = 1e-9;
pub const TOL_GEN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbsError {
    #[error("continuation stalled at gamma = {gamma}")]
    ContinuationStall { gamma: f64 },
    #[error("branch point is not a valid start: {0}")]
    InvalidStart(String),
    #[error("rightmost point {found} differs from the branch point {expected}")]
    NotRightmost { found: C64, expected: C64 },
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsPoint {
    pub lambda: C64,
    pub nu_pair: (C64, C64),
    pub gamma_sep: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsSpecCurve {
    pub c: f64,
    pub chi: f64,
    pub points: Vec<AbsPoint>,
    pub origin: BranchPoint,
    /// Set when `|dλ/dγ|` blew up; the curve stops there.
    pub fold_detected: bool,
    /// Why tracing ended before `gamma_max`, if it did.
    pub stopped: Option<String>,
}

struct Corrected {
    lambda: C64,
    nu: C64,
    iterations: usize,
}

fn correct(chi: f64, c: f64, gamma: f64, mut lambda: C64, mut nu: C64) -> Option<Corrected> {
    let ig = C64::new(0.0, gamma);
    for it in 0..12 {
        let f1 = eval_dispersion(chi, c, lambda, nu);
        let f2 = eval_dispersion(chi, c, lambda, nu + ig);
        let a = dispersion_dnu(chi, c, nu);
        let b = dispersion_dnu(chi, c, nu + ig);
        // [[−1, a], [−1, b]] (δλ, δν) = −(f1, f2)
        let det = a - b;
        if det.norm() == 0.0 {
            return None;
        }
        let dnu = (f1 - f2) / (b - a);
        let dlam = f1 + a * dnu;
        lambda += dlam;
        nu += dnu;
        let scale = 1.0 + lambda.norm() + nu.norm();
        if dlam.norm() + dnu.norm() < 1e-14 * scale {
            let r1 = eval_dispersion(chi, c, lambda, nu).norm();
            let r2 = eval_dispersion(chi, c, lambda, nu + ig).norm();
            if r1 < 1e-10 && r2 < 1e-10 {
                return Some(Corrected {
                    lambda,
                    nu,
                    iterations: it + 1,
                });
            }
            return None;
        }
        if !lambda.re.is_finite() || !nu.re.is_finite() {
            return None;
        }
    }
    None
}

/// `(ν, ν + iγ)` are the 2nd and 3rd ordered roots at `λ`.
fn pinned(chi: f64, c: f64, lambda: C64, nu: C64, gamma: f64) -> Result<bool, DispersionError> {
    let r = spatial_roots(chi, c, lambda)?.nu;
    let pair = [nu + C64::new(0.0, gamma), nu];
    let tol = 1e-7 * (1.0 + nu.norm());
    let same = |x: C64, y: C64| (x - y).norm() < tol;
    let matched = (same(r[1], pair[0]) && same(r[2], pair[1])) || (same(r[1], pair[1]) && same(r[2], pair[0]));
    let sep = 10.0 * TOL_ABS;
    Ok(matched && r[0].re > nu.re + sep && r[3].re < nu.re - sep)
}

/// Traces the curve from `bp` until `γ = gamma_max`, using `step` as the largest `γ` increment.
pub fn trace_absolute(bp: &BranchPoint, gamma_max: f64, step: f64) -> Result<AbsSpecCurve, AbsError> {
    if !bp.pinched {
        return Err(AbsError::InvalidStart("branch point is not pinched".into()));
    }
    if !(bp.residual_d < 1e-10 && bp.residual_dnu < 1e-10) {
        return Err(AbsError::InvalidStart("branch point residuals too large".into()));
    }
    let (chi, c) = (bp.chi, bp.c);
    let dnn = dispersion_dnunu(chi, bp.nu_br);
    let mut curve = AbsSpecCurve {
        c,
        chi,
        points: vec![AbsPoint {
            lambda: bp.lambda_br,
            nu_pair: (bp.nu_br, bp.nu_br),
            gamma_sep: 0.0,
        }],
        origin: *bp,
        fold_detected: false,
        stopped: None,
    };
    let max_step = step.max(1e-12);
    let mut h = max_step.min(1e-3);
    let mut gamma = 0.0;
    let mut last: Option<(f64, C64, C64)> = None;
    let mut prev: Option<(f64, C64, C64)> = None;
    while gamma < gamma_max {
        let g = (gamma + h).min(gamma_max);
        let (lp, np) = match (last, prev) {
            // secant predictor in γ
            (Some((g1, l1, n1)), Some((g0, l0, n0))) => {
                let s = (g - g1) / (g1 - g0);
                (l1 + (l1 - l0) * s, n1 + (n1 - n0) * s)
            }
            // local expansion at the branch point
            _ => (
                bp.lambda_br - dnn * (g * g / 8.0),
                bp.nu_br - C64::new(0.0, g / 2.0),
            ),
        };
        match correct(chi, c, g, lp, np) {
            Some(cor) => {
                if !pinned(chi, c, cor.lambda, cor.nu, g)? {
                    curve.stopped = Some(format!("pair left the 2nd/3rd root positions at gamma = {g}"));
                    break;
                }
                if let Some((g1, l1, _)) = last {
                    let slope = (cor.lambda - l1).norm() / (g - g1);
                    if slope > 1e3 {
                        curve.fold_detected = true;
                        curve.stopped = Some(format!("fold detected at gamma = {g}"));
                        break;
                    }
                }
                curve.points.push(AbsPoint {
                    lambda: cor.lambda,
                    nu_pair: (cor.nu + C64::new(0.0, g), cor.nu),
                    gamma_sep: g,
                });
                prev = last;
                last = Some((g, cor.lambda, cor.nu));
                gamma = g;
                if cor.iterations <= 3 {
                    h = (2.0 * h).min(max_step);
                } else if cor.iterations > 6 {
                    h *= 0.5;
                }
            }
            None => {
                h *= 0.5;
                if h < 1e-12 {
                    return Err(AbsError::ContinuationStall { gamma });
                }
            }
        }
    }
    Ok(curve)
}

/// Rightmost absolute-spectrum point for the pinched branch at `(chi, c)`.
pub fn rightmost_absolute(chi: f64, c: f64) -> Result<C64, AbsError> {
    let bp = track_branch_point(chi, c)?;
    let curve = trace_absolute(&bp, 2.0, 0.02)?;
    let mut best = bp.lambda_br;
    for p in &curve.points {
        for l in [p.lambda, p.lambda.conj()] {
            if l.re > best.re {
                best = l;
            }
        }
    }
    if (best.re - bp.lambda_br.re).abs() > TOL_ABS {
        return Err(AbsError::NotRightmost {
            found: best,
            expected: bp.lambda_br,
        });
    }
    Ok(bp.lambda_br)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genericity {
    pub generic: bool,
    pub warning: Option<String>,
}

/// Separation and transversality of the root pair away from the branch point.
pub fn genericity_check(curve: &AbsSpecCurve) -> Genericity {
    if curve.points.len() < 2 {
        return Genericity {
            generic: true,
            warning: Some("curve has no points beyond the branch point".into()),
        };
    }
    let warning = (curve.points.len() < 10).then(|| format!("only {} points", curve.points.len()));
    let diff = |p: &AbsPoint| p.nu_pair.0 - p.nu_pair.1;
    let mut generic = true;
    for w in curve.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !(b.gamma_sep > 0.0) || diff(b).norm() == 0.0 {
            generic = false;
            break;
        }
        let dl = (b.lambda - a.lambda).norm();
        if dl == 0.0 || (diff(b) - diff(a)).norm() / dl <= TOL_GEN {
            generic = false;
            break;
        }
    }
    Genericity { generic, warning }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch_point::{closed_form_spreading, find_double_root};

    fn sample_branch_point() -> BranchPoint {
        let ls = closed_form_spreading(1.0).unwrap();
        find_double_root(1.0, ls.c_lin, (ls.lambda_lin, ls.nu_lin())).unwrap()
    }

    #[test]
    fn curve_leaves_branch_point_leftward_and_quadratically() {
        let bp = sample_branch_point();
        let curve = trace_absolute(&bp, 0.5, 1e-3).unwrap();
        assert!(curve.points.len() > 10);
        let dnn = dispersion_dnunu(1.0, bp.nu_br).norm();
        for p in curve.points.iter().skip(1).take(10) {
            assert!(p.lambda.re < bp.lambda_br.re);
            let q = (p.lambda - bp.lambda_br).norm() / (p.gamma_sep * p.gamma_sep);
            assert!((q - dnn / 8.0).abs() < 1e-2 * dnn, "{q} vs {}", dnn / 8.0);
        }
        // gamma strictly increasing
        for w in curve.points.windows(2) {
            assert!(w[1].gamma_sep > w[0].gamma_sep);
        }
        assert!(genericity_check(&curve).generic);
    }

    #[test]
    fn rightmost_point_is_branch_point() {
        let ls = closed_form_spreading(1.0).unwrap();
        let r = rightmost_absolute(1.0, ls.c_lin).unwrap();
        assert!(r.re.abs() < 1e-9);
        assert!((r.im - ls.lambda_lin.im).abs() < 1e-9);
        let r2 = rightmost_absolute(1.0, ls.c_lin + 0.1).unwrap();
        assert!(r2.re < 0.0);
    }

    #[test]
    fn injected_duplicate_pair_is_not_generic() {
        let bp = sample_branch_point();
        let mut curve = trace_absolute(&bp, 0.2, 1e-2).unwrap();
        let k = curve.points.len() / 2;
        let p = curve.points[k];
        curve.points[k] = AbsPoint {
            nu_pair: (p.nu_pair.1, p.nu_pair.1),
            gamma_sep: 0.0,
            ..p
        };
        assert!(!genericity_check(&curve).generic);
        curve.points.truncate(1);
        let g = genericity_check(&curve);
        assert!(g.generic && g.warning.is_some());
    }
}
