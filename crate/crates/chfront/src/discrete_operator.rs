//! Fourth-order finite-difference discretisation of the linearisation
//! `Lu = −u'''' − (χu)'' + cu'` on `[−H, H]` with clamped ends.
//!
//! The default assembly corrects the stencils that straddle `x = ±ℓ` with
//! Taylor expansions of the one-sided solution, using the jump conditions
//! implied by continuity of `u`, `u'`, `u'' + χu` and `(u'' + χu)'`. The
//! simpler midpoint assembly (`χ(±ℓ) = (χ₊ + χ₋)/2` in `−D₂(D₂ + χ) + cD₁`)
//! is kept as an option.

use faer::Mat;
use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banded::{BandLu, BandMatrix};
use crate::dispersion::ModelParams;
use crate::evans::CBox;

/// Default distance between `±ℓ` and the truncated ends.
pub const DEFAULT_MARGIN: f64 = 15.0;
/// Largest matrix handed to the dense eigensolver.
pub const DENSE_LIMIT: usize = 4000;
/// Residual bound `‖(M − λ)v‖/‖v‖` for returned pairs.
pub const TOL_RESIDUAL: f64 = 1e-8;

const BAND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),
    #[error("no eigenvalue near seed {seed}: nearest is {found}")]
    NoEigenvalueNearSeed { seed: C64, found: C64 },
    #[error("matrix of size {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("shifted operator is singular at {0}")]
    Singular(C64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChiTreatment {
    #[default]
    InterfaceCorrected,
    Midpoint,
}

/// Banded real operator on the interior nodes `x_i = −H + i h`, `i = 1..N−1`.
#[derive(Clone, Debug)]
pub struct GridOperator {
    pub l_half: f64,
    pub h: f64,
    pub n: usize,
    pub eta: f64,
    pub params: ModelParams,
    pub treatment: ChiTreatment,
    pub matrix: BandMatrix,
}

impl GridOperator {
    pub fn x(&self) -> Vec<f64> {
        (1..=self.n).map(|i| -self.l_half + i as f64 * self.h).collect()
    }

    /// Diagonal `e^{η⟨x⟩}` of the similarity transform.
    pub fn weights(&self) -> Vec<f64> {
        self.x().iter().map(|x| (self.eta * (1.0 + x * x).sqrt()).exp()).collect()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.n;
        Mat::from_fn(n, n, |i, j| self.matrix.get(i, j).re)
    }

    /// LU of `M − s`.
    pub fn shifted_lu(&self, s: C64) -> Result<BandLu, OperatorError> {
        self.matrix.shifted(s).lu().ok_or(OperatorError::Singular(s))
    }

    /// LU of `Mᵀ − s`.
    pub fn shifted_lu_transpose(&self, s: C64) -> Result<BandLu, OperatorError> {
        self.matrix.transpose().shifted(s).lu().ok_or(OperatorError::Singular(s))
    }

    /// Discrete pairing `h Σ conj(a) b`.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        self.h * a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>()
    }

    pub fn residual(&self, lambda: C64, v: &[C64]) -> f64 {
        let mv = self.apply(v);
        let num: f64 = mv.iter().zip(v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum();
        let den: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

/// Weights for derivatives `0..=4` at `ξ` from values at `ξ + o_q h`.
fn one_sided_weights(offsets: &[f64; 5], h: f64) -> [[f64; 5]; 5] {
    let mut fact = [1.0; 5];
    for m in 1..5 {
        fact[m] = fact[m - 1] * m as f64;
    }
    let v = Matrix5::from_fn(|m, q| offsets[q].powi(m as i32) / fact[m]);
    let lu = v.lu();
    let mut out = [[0.0; 5]; 5];
    for (m, row) in out.iter_mut().enumerate() {
        let mut e = Vector5::zeros();
        e[m] = h.powi(-(m as i32));
        let w = lu.solve(&e).expect("distinct nodes");
        row.copy_from_slice(w.as_slice());
    }
    out
}

/// Jump `other − own` of `u⁽ᵐ⁾`, `m = 2..=6`, as coefficients on the own-side
/// derivatives `u, u', u'', u''', u''''` at the interface.
fn jump_coefficients(chi_own: f64, chi_other: f64, c: f64) -> [[f64; 5]; 7] {
    let d = chi_other - chi_own;
    let co = chi_other;
    let mut j = [[0.0; 5]; 7];
    j[2] = [-d, 0.0, 0.0, 0.0, 0.0];
    j[3] = [0.0, -d, 0.0, 0.0, 0.0];
    j[4] = [co * d, 0.0, -d, 0.0, 0.0];
    j[5] = [-c * d, co * d, 0.0, -d, 0.0];
    j[6] = [-co * co * d, 0.0, d * d, 0.0, -2.0 * d];
    j
}

struct Assembler {
    big_n: usize,
    band: BandMatrix,
}

impl Assembler {
    /// Adds `w·u_j` to row `r`; ghost nodes use the even reflection and
    /// the boundary nodes carry `u = 0`.
    fn add(&mut self, r: usize, j: i64, w: f64) {
        let n = self.big_n as i64;
        let mut j = j;
        if j <= 0 {
            j = -j;
        }
        if j >= n {
            j = 2 * n - j;
        }
        if j == 0 || j == n || w == 0.0 {
            return;
        }
        self.band.add(r, (j - 1) as usize, C64::new(w, 0.0));
    }
}

const D4: [f64; 7] = [-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0];
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];

/// Assembles the operator with the interface-corrected stencils.
pub fn build_operator(params: &ModelParams, l_half: f64, h: f64) -> Result<GridOperator, OperatorError> {
    build_operator_with(params, l_half, h, ChiTreatment::InterfaceCorrected)
}

pub fn build_operator_with(
    params: &ModelParams,
    l_half: f64,
    h: f64,
    treatment: ChiTreatment,
) -> Result<GridOperator, OperatorError> {
    let ell = params.ell;
    if !(h > 0.0 && l_half > 0.0) {
        return Err(OperatorError::GeometryMismatch("h and the half-length must be positive".into()));
    }
    let nf = 2.0 * l_half / h;
    let big_n = nf.round() as usize;
    if (nf - big_n as f64).abs() > 1e-8 * nf {
        return Err(OperatorError::GeometryMismatch(format!(
            "2H/h = {nf} is not an integer"
        )));
    }
    if l_half < ell + DEFAULT_MARGIN - 1e-9 {
        return Err(OperatorError::GeometryMismatch(format!(
            "half-length {l_half} < ell + margin = {}",
            ell + DEFAULT_MARGIN
        )));
    }
    if 2.0 * ell < 10.0 * h {
        return Err(OperatorError::GeometryMismatch("plateau narrower than ten grid cells".into()));
    }
    let n = big_n - 1;
    let mut asm = Assembler { big_n, band: BandMatrix::zeros(n, BAND, BAND) };
    let xn = |i: i64| -l_half + i as f64 * h;
    let tol = 1e-9 * h;
    let (cp, cm, c) = (params.chi_plus, params.chi_minus, params.c);
    match treatment {
        ChiTreatment::Midpoint => {
            let chi_at = |x: f64| {
                if x.abs() < ell - tol {
                    cp
                } else if x.abs() > ell + tol {
                    cm
                } else {
                    0.5 * (cp + cm)
                }
            };
            let h2 = 12.0 * h * h;
            for i in 1..big_n {
                let r = i - 1;
                let i = i as i64;
                for (a, &wa) in D2.iter().enumerate() {
                    let m = i + a as i64 - 2;
                    let outer = -wa / h2;
                    for (b, &wb) in D2.iter().enumerate() {
                        asm.add(r, m + b as i64 - 2, outer * wb / h2);
                    }
                    // χ_m u_m with u_m through the reflection, so χ at ghosts is exterior
                    asm.add(r, m, outer * chi_at(xn(m)));
                }
                for (b, &wb) in D1.iter().enumerate() {
                    asm.add(r, i + b as i64 - 2, c * wb / (12.0 * h));
                }
            }
        }
        ChiTreatment::InterfaceCorrected => {
            let interfaces = [-ell, ell];
            for i in 1..big_n {
                let r = i - 1;
                let ii = i as i64;
                let xi = xn(ii);
                let plateau = xi.abs() <= ell + tol;
                let chi_s = if plateau { cp } else { cm };
                let chi_o = if plateau { cm } else { cp };
                let mut st = [0.0; 7];
                for k in 0..7 {
                    st[k] -= D4[k] / (6.0 * h.powi(4));
                }
                for k in 0..5 {
                    st[k + 1] += -chi_s * D2[k] / (12.0 * h * h) + c * D1[k] / (12.0 * h);
                }
                for (k, &w) in st.iter().enumerate() {
                    let j = ii + k as i64 - 3;
                    asm.add(r, j, w);
                    let xj = xn(j);
                    for (side, &xi_if) in interfaces.iter().enumerate() {
                        if (xi - xi_if).abs() > 3.0 * h + tol {
                            continue;
                        }
                        // +1: own side lies to the right of the interface
                        let dir = if plateau {
                            if side == 0 { 1.0 } else { -1.0 }
                        } else if xi < xi_if {
                            -1.0
                        } else {
                            1.0
                        };
                        if dir * (xj - xi_if) >= -tol {
                            continue;
                        }
                        let q0 = if dir > 0.0 {
                            ((xi_if - tol + l_half) / h).ceil() as i64
                        } else {
                            ((xi_if + tol + l_half) / h).floor() as i64
                        };
                        let nodes: [i64; 5] = std::array::from_fn(|q| q0 + (dir as i64) * q as i64);
                        let offs: [f64; 5] = std::array::from_fn(|q| (xn(nodes[q]) - xi_if) / h);
                        let dw = one_sided_weights(&offs, h);
                        let jumps = jump_coefficients(chi_s, chi_o, c);
                        let t = xj - xi_if;
                        let mut coef = [0.0; 5];
                        let mut fact = 1.0;
                        for (m, jm) in jumps.iter().enumerate() {
                            if m > 0 {
                                fact *= m as f64;
                            }
                            let tm = t.powi(m as i32) / fact;
                            for d in 0..5 {
                                coef[d] += jm[d] * tm;
                            }
                        }
                        for d in 0..5 {
                            if coef[d] == 0.0 {
                                continue;
                            }
                            for q in 0..5 {
                                asm.add(r, nodes[q], -w * coef[d] * dw[d][q]);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut matrix = asm.band;
    let eta = params.eta;
    if eta != 0.0 {
        let bracket = |x: f64| (1.0 + x * x).sqrt();
        let mut out = BandMatrix::zeros(n, BAND, BAND);
        for i in 0..n {
            for j in i.saturating_sub(BAND)..=(i + BAND).min(n - 1) {
                let v = matrix.get(i, j);
                if v != C64::new(0.0, 0.0) {
                    let f = (eta * (bracket(xn(i as i64 + 1)) - bracket(xn(j as i64 + 1)))).exp();
                    out.add(i, j, v * f);
                }
            }
        }
        matrix = out;
    }
    Ok(GridOperator { l_half, h, n, eta, params: params.clone(), treatment, matrix })
}

/// Eigenvalue with right eigenvector `v` and adjoint eigenvector `w`
/// (`M*w = λ̄w`), normalised so that `h Σ conj(w) v = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: C64,
    pub v: Vec<C64>,
    pub w: Vec<C64>,
    pub normalized: bool,
    pub residual: f64,
}

fn unit(v: &mut [C64]) {
    let s = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= s);
}

/// Inverse iteration at a fixed shift; returns the refined eigenvalue.
fn inverse_iterate(lu: &BandLu, shift: C64, v: &mut Vec<C64>, iters: usize) -> C64 {
    let mut lambda = shift;
    for _ in 0..iters {
        let y = lu.solve(v);
        let num: C64 = v.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        lambda = shift + den / num;
        *v = y;
        unit(v);
    }
    lambda
}

/// Adjoint vector `w` for an eigenvalue `λ` and normalisation against `v`.
fn adjoint_for(op: &GridOperator, lambda: C64, v: &[C64]) -> Result<Vec<C64>, OperatorError> {
    // Mᵀq = λq, w = conj(q)
    let shift = lambda + C64::new(1e-10, 1e-10) * (1.0 + lambda.norm());
    let lu = op.shifted_lu_transpose(shift)?;
    let mut q: Vec<C64> = v.iter().map(|z| z.conj()).collect();
    unit(&mut q);
    inverse_iterate(&lu, shift, &mut q, 3);
    let mut w: Vec<C64> = q.iter().map(|z| z.conj()).collect();
    let pair = op.inner(&w, v);
    if pair.norm() == 0.0 {
        return Err(OperatorError::EigensolverFailure(format!("left and right vectors orthogonal at {lambda}")));
    }
    let s = pair.conj().inv();
    w.iter_mut().for_each(|z| *z *= s);
    Ok(w)
}

/// Polishes a pair until the residual bound holds.
fn polish(op: &GridOperator, lambda: C64, v: &mut Vec<C64>) -> Result<(C64, f64), OperatorError> {
    let mut lam = lambda;
    let mut res = op.residual(lam, v);
    for _ in 0..4 {
        if res < 1e-3 * TOL_RESIDUAL {
            break;
        }
        let shift = lam + C64::new(1e-9, 1e-9) * (1.0 + lam.norm());
        let lu = op.shifted_lu(shift)?;
        let cand = inverse_iterate(&lu, shift, v, 2);
        lam = cand;
        res = op.residual(lam, v);
    }
    Ok((lam, res))
}

/// Dense eigendecomposition filtered to `region`; pairs in a region also
/// carry adjoint vectors.
pub fn spectrum(op: &GridOperator, region: Option<&CBox>) -> Result<Vec<EigenPair>, OperatorError> {
    if op.n > DENSE_LIMIT {
        return Err(OperatorError::TooLarge { n: op.n, limit: DENSE_LIMIT });
    }
    let evd = op
        .to_dense()
        .eigen()
        .map_err(|e| OperatorError::EigensolverFailure(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut out = Vec::new();
    for k in 0..op.n {
        let lam = s[k];
        let lambda = C64::new(lam.re, lam.im);
        if let Some(b) = region {
            if !(lambda.re >= b.re_min && lambda.re <= b.re_max && lambda.im >= b.im_min && lambda.im <= b.im_max) {
                continue;
            }
        }
        let mut v: Vec<C64> = (0..op.n).map(|i| {
            let z = u[(i, k)];
            C64::new(z.re, z.im)
        }).collect();
        unit(&mut v);
        let mut residual = op.residual(lambda, &v);
        let mut lambda = lambda;
        if region.is_some() {
            let (l2, r2) = polish(op, lambda, &mut v)?;
            lambda = l2;
            residual = r2;
            if residual > TOL_RESIDUAL {
                return Err(OperatorError::EigensolverFailure(format!(
                    "residual {residual:e} at {lambda}"
                )));
            }
        }
        let (w, normalized) = if region.is_some() {
            (adjoint_for(op, lambda, &v)?, true)
        } else {
            (Vec::new(), false)
        };
        out.push(EigenPair { lambda, v, w, normalized, residual });
    }
    out.sort_by(|a, b| b.lambda.re.total_cmp(&a.lambda.re).then(b.lambda.im.total_cmp(&a.lambda.im)));
    Ok(out)
}

/// Eigenvalues only, sorted by decreasing real part.
pub fn eigenvalues(op: &GridOperator) -> Result<Vec<C64>, OperatorError> {
    if op.n > DENSE_LIMIT {
        return Err(OperatorError::TooLarge { n: op.n, limit: DENSE_LIMIT });
    }
    let ev = op
        .to_dense()
        .eigenvalues()
        .map_err(|e| OperatorError::EigensolverFailure(format!("{e:?}")))?;
    let mut out: Vec<C64> = ev.iter().map(|z| C64::new(z.re, z.im)).collect();
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

/// Normalised pair nearest `seed` by shifted inverse iteration.
///
/// Fails if the eigenvalue found is farther from the seed than half the gap
/// between the seed and its complex conjugate.
pub fn leading_pair(op: &GridOperator, seed: C64) -> Result<EigenPair, OperatorError> {
    let mut v: Vec<C64> = op
        .x()
        .iter()
        .map(|&x| C64::new((-(x / (op.params.ell + 1.0)).powi(2)).exp(), 0.1 * x.sin()))
        .collect();
    unit(&mut v);
    let lu = op.shifted_lu(seed)?;
    let mut lambda = inverse_iterate(&lu, seed, &mut v, 12);
    // Rayleigh-style refinement with refreshed shifts
    for _ in 0..3 {
        let shift = lambda + C64::new(1e-9, 1e-9) * (1.0 + lambda.norm());
        let lu = op.shifted_lu(shift)?;
        lambda = inverse_iterate(&lu, shift, &mut v, 2);
    }
    let residual = op.residual(lambda, &v);
    if (lambda - seed).norm() > 0.5 * seed.im.abs().max(1e-12) {
        return Err(OperatorError::NoEigenvalueNearSeed { seed, found: lambda });
    }
    if residual > TOL_RESIDUAL {
        return Err(OperatorError::EigensolverFailure(format!("residual {residual:e} at {lambda}")));
    }
    let w = adjoint_for(op, lambda, &v)?;
    Ok(EigenPair { lambda, v, w, normalized: true, residual })
}

impl EigenPair {
    /// Rescales `v → s·v`, `w → w/conj(s)`; the pairing is unchanged.
    pub fn rescaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.v.iter_mut().for_each(|z| *z *= s);
        let t = s.conj().inv();
        out.w.iter_mut().for_each(|z| *z *= t);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_weights_exact_on_quartics() {
        let offs = [0.3, 1.3, 2.3, 3.3, 4.3];
        let h = 0.1;
        let w = one_sided_weights(&offs, h);
        // f(x) = x⁴ around ξ = 0
        let f: Vec<f64> = offs.iter().map(|o| (o * h).powi(4)).collect();
        let d: Vec<f64> = (0..5).map(|m| (0..5).map(|q| w[m][q] * f[q]).sum()).collect();
        assert!(d[0].abs() < 1e-12 && d[3].abs() < 1e-9 && (d[4] - 24.0).abs() < 1e-6);
    }

    #[test]
    fn band_reaches_geometry_errors() {
        let p = ModelParams::default().with_ell(15.0);
        assert!(matches!(build_operator(&p, 20.0, 0.1), Err(OperatorError::GeometryMismatch(_))));
        assert!(matches!(build_operator(&p, 45.0, 0.07), Err(OperatorError::GeometryMismatch(_))));
        assert!(build_operator(&p, 45.0, 0.1).is_ok());
    }
}
