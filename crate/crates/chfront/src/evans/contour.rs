//! Eigenvalue counting by the argument principle.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{plateau_determinant, EvansError};
use crate::dispersion::ModelParams;

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl CBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re_min, self.re_max, -self.im_max, -self.im_min)
    }

    /// Corners in counter-clockwise order starting bottom-left.
    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }
}

const MAX_DEPTH: usize = 24;

fn phase_change(a: C64, b: C64) -> f64 {
    (b / a).arg()
}

fn refine(
    params: &ModelParams,
    za: C64,
    fa: C64,
    zb: C64,
    fb: C64,
    depth: usize,
) -> Result<f64, EvansError> {
    let d = phase_change(fa, fb);
    if d.abs() < 0.5 * PI {
        return Ok(d);
    }
    if depth >= MAX_DEPTH {
        return Err(EvansError::ContourTooCoarse(za));
    }
    let zm = 0.5 * (za + zb);
    let fm = plateau_determinant(params, zm)?.value;
    Ok(refine(params, za, fa, zm, fm, depth + 1)? + refine(params, zm, fm, zb, fb, depth + 1)?)
}

/// Winding number of the plateau determinant around the boundary of `bx`,
/// i.e. the number of eigenvalues inside.
pub fn count_eigs_in_box(params: &ModelParams, bx: &CBox, n_contour: usize) -> Result<i64, EvansError> {
    let per_edge = (n_contour / 4).max(4);
    let corners = bx.corners();
    let mut pts = Vec::with_capacity(4 * per_edge + 1);
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        for k in 0..per_edge {
            pts.push(a + (b - a) * (k as f64 / per_edge as f64));
        }
    }
    pts.push(corners[0]);
    let vals: Vec<C64> = pts
        .par_iter()
        .map(|&z| plateau_determinant(params, z).map(|v| v.value))
        .collect::<Result<_, _>>()?;
    if let Some(i) = vals.iter().position(|v| !(v.norm() > 0.0)) {
        return Err(EvansError::ContourTooCoarse(pts[i]));
    }
    let total: f64 = (0..pts.len() - 1)
        .into_par_iter()
        .map(|i| refine(params, pts[i], vals[i], pts[i + 1], vals[i + 1], 0))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    let w = total / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.05 {
        return Err(EvansError::ContourTooCoarse(corners[0]));
    }
    Ok(n as i64)
}
