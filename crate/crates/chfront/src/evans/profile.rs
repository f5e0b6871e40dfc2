//! Exact piecewise-exponential eigenfunctions at a plateau eigenvalue.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{CrossingData, EvansError};
use crate::branch_point::closed_form_spreading;
use crate::dispersion::{order_roots, spatial_roots, ModelParams};

/// Minimal plateau-fit quality accepted by [`eigenfunction_profiles`].
pub const MIN_FIT_R2: f64 = 0.9;

/// A function given on `(−∞, −ℓ)`, `[−ℓ, ℓ]`, `(ℓ, ∞)` by sums of exponentials.
///
/// Left terms are `a·e^{ν(x+ℓ)}`, right terms `b·e^{ν(x−ℓ)}`, plateau terms
/// `d·e^{ν(x−x_ref)}` with `x_ref = ±ℓ` chosen so each term is at most one in
/// modulus on the plateau.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExp {
    pub ell: f64,
    pub left: Vec<(C64, C64)>,
    pub plateau: Vec<(C64, C64, f64)>,
    pub right: Vec<(C64, C64)>,
}

impl PiecewiseExp {
    /// `m`-th derivative at `x`.
    pub fn eval(&self, x: f64, m: i32) -> C64 {
        let term = |coef: C64, nu: C64, x0: f64| coef * nu.powi(m) * (nu * (x - x0)).exp();
        if x < -self.ell {
            self.left.iter().map(|&(a, nu)| term(a, nu, -self.ell)).sum()
        } else if x > self.ell {
            self.right.iter().map(|&(b, nu)| term(b, nu, self.ell)).sum()
        } else {
            self.plateau.iter().map(|&(d, nu, x0)| term(d, nu, x0)).sum()
        }
    }

    pub fn scale(&mut self, s: C64) {
        for t in self.left.iter_mut().chain(self.right.iter_mut()) {
            t.0 *= s;
        }
        for t in self.plateau.iter_mut() {
            t.0 *= s;
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            ell: self.ell,
            left: self.left.iter().map(|&(a, n)| (a.conj(), n.conj())).collect(),
            plateau: self.plateau.iter().map(|&(d, n, x0)| (d.conj(), n.conj(), x0)).collect(),
            right: self.right.iter().map(|&(b, n)| (b.conj(), n.conj())).collect(),
        }
    }
}

/// `(e^{s·len} − 1)/s`, stable for small `s`.
fn exp_ratio(s: C64, len: f64) -> C64 {
    let z = s * len;
    if z.norm() < 1e-4 {
        len * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (z.exp() - 1.0) / s
    }
}

/// `∫ f·g dx` over the real line (bilinear, no conjugation).
pub fn bilinear_integral(f: &PiecewiseExp, g: &PiecewiseExp) -> C64 {
    let ell = f.ell;
    let mut total = C64::new(0.0, 0.0);
    for &(a, n) in &f.left {
        for &(b, m) in &g.left {
            total += a * b / (n + m);
        }
    }
    for &(a, n) in &f.right {
        for &(b, m) in &g.right {
            total -= a * b / (n + m);
        }
    }
    for &(a, n, xa) in &f.plateau {
        for &(b, m, xb) in &g.plateau {
            // integrand at −ℓ times (e^{s·2ℓ} − 1)/s
            let start = (n * (-ell - xa) + m * (-ell - xb)).exp();
            total += a * b * start * exp_ratio(n + m, 2.0 * ell);
        }
    }
    total
}

type VecFn = fn(C64, f64) -> [C64; 4];

fn state_vec(nu: C64, chi: f64) -> [C64; 4] {
    let q = nu * nu + chi;
    [C64::new(1.0, 0.0), nu, q, nu * q]
}

fn adjoint_vec(nu: C64, _chi: f64) -> [C64; 4] {
    [C64::new(1.0, 0.0), nu, nu * nu, nu * nu * nu]
}

/// Null vector of the 8×8 continuity system at `x = ±ℓ`.
fn glue(
    ell: f64,
    chi_p: f64,
    chi_m: f64,
    plateau_roots: [C64; 4],
    exterior_roots: [C64; 4],
    vecf: VecFn,
) -> Result<PiecewiseExp, EvansError> {
    let left = [exterior_roots[0], exterior_roots[1]];
    let right = [exterior_roots[2], exterior_roots[3]];
    let xref: Vec<f64> = plateau_roots
        .iter()
        .map(|z| if z.re >= 0.0 { ell } else { -ell })
        .collect();
    let mut g = DMatrix::<C64>::zeros(8, 8);
    for (k, &nu) in left.iter().enumerate() {
        let v = vecf(nu, chi_m);
        for r in 0..4 {
            g[(r, k)] = v[r];
        }
    }
    for (j, &nu) in plateau_roots.iter().enumerate() {
        let v = vecf(nu, chi_p);
        let em = (nu * (-ell - xref[j])).exp();
        let ep = (nu * (ell - xref[j])).exp();
        for r in 0..4 {
            g[(r, 2 + j)] = -v[r] * em;
            g[(4 + r, 2 + j)] = v[r] * ep;
        }
    }
    for (k, &nu) in right.iter().enumerate() {
        let v = vecf(nu, chi_m);
        for r in 0..4 {
            g[(4 + r, 6 + k)] = -v[r];
        }
    }
    let norms: Vec<f64> = (0..8).map(|j| g.column(j).norm()).collect();
    for j in 0..8 {
        let s = norms[j];
        g.column_mut(j).iter_mut().for_each(|z| *z /= s);
    }
    let svd = SVD::new(g, false, true);
    let sv = svd.singular_values.clone();
    let vt = svd.v_t.ok_or(EvansError::NullVectorDegenerate(f64::NAN, f64::NAN))?;
    let mut idx: Vec<usize> = (0..8).collect();
    idx.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let (s0, s1, smax) = (sv[idx[0]], sv[idx[1]], sv[idx[7]]);
    if s0 > 1e-6 * smax || s1 < 1e-9 * smax {
        return Err(EvansError::NullVectorDegenerate(s0 / smax, s1 / smax));
    }
    let coef: Vec<C64> = (0..8).map(|j| vt[(idx[0], j)].conj() / norms[j]).collect();
    Ok(PiecewiseExp {
        ell,
        left: left.iter().enumerate().map(|(k, &nu)| (coef[k], nu)).collect(),
        plateau: plateau_roots
            .iter()
            .enumerate()
            .map(|(j, &nu)| (coef[2 + j], nu, xref[j]))
            .collect(),
        right: right.iter().enumerate().map(|(k, &nu)| (coef[6 + k], nu)).collect(),
    })
}

/// Eigenfunction `p` and adjoint solution `φ` with `∫ p φ = 1`; `ψ = conj φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactEigenfunctions {
    pub lambda: C64,
    pub p: PiecewiseExp,
    pub phi: PiecewiseExp,
}

impl ExactEigenfunctions {
    pub fn p(&self, x: f64, m: i32) -> C64 {
        self.p.eval(x, m)
    }
    pub fn psi(&self, x: f64, m: i32) -> C64 {
        self.phi.eval(x, m).conj()
    }
    pub fn rotate(&mut self, phase: C64) {
        self.p.scale(phase);
        self.phi.scale(1.0 / phase);
    }
}

/// Builds `p` (kernel of `L − λ`) and `φ` (kernel of `Lᵀ − λ`) at an eigenvalue `λ`.
pub fn exact_eigenfunctions(params: &ModelParams, lambda: C64) -> Result<ExactEigenfunctions, EvansError> {
    let rp = spatial_roots(params.chi_plus, params.c, lambda)?.nu;
    let rm = spatial_roots(params.chi_minus, params.c, lambda)?.nu;
    let p = glue(params.ell, params.chi_plus, params.chi_minus, rp, rm, state_vec)?;
    // adjoint symbol is d(λ, −ν)
    let mut ap = rp.map(|z| -z);
    let mut am = rm.map(|z| -z);
    order_roots(&mut ap);
    order_roots(&mut am);
    let mut phi = glue(params.ell, params.chi_plus, params.chi_minus, ap, am, adjoint_vec)?;
    let pair = bilinear_integral(&p, &phi);
    phi.scale(1.0 / pair);
    Ok(ExactEigenfunctions { lambda, p, phi })
}

/// Least-squares amplitude of `f(x)·e^{−κx}` against `sin(π(x−ℓ)/(2ℓ))` on `[−ℓ, ℓ]`.
///
/// Returns `(amplitude A, R², max |f e^{−κx} − A sin| / |A|)`.
pub fn fit_plateau_amplitude(xs: &[f64], f: &[C64], exponent: C64, ell: f64) -> (C64, f64, f64) {
    let mut q = Vec::new();
    let mut s = Vec::new();
    for (&x, &v) in xs.iter().zip(f) {
        if x.abs() <= ell + 1e-12 {
            q.push(v * (-exponent * x).exp());
            s.push((std::f64::consts::PI * (x - ell) / (2.0 * ell)).sin());
        }
    }
    let ss: f64 = s.iter().map(|v| v * v).sum();
    let amp: C64 = q.iter().zip(&s).map(|(a, b)| a * b).sum::<C64>() / ss;
    let mean: C64 = q.iter().sum::<C64>() / q.len() as f64;
    let res: f64 = q.iter().zip(&s).map(|(a, b)| (a - amp * b).norm_sqr()).sum();
    let tot: f64 = q.iter().map(|a| (a - mean).norm_sqr()).sum();
    let rmax = q.iter().zip(&s).map(|(a, b)| (a - amp * b).norm()).fold(0.0, f64::max);
    (amp, 1.0 - res / tot, rmax / amp.norm())
}

fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64, iters: usize) -> [f64; 2] {
    let mut pts = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut vals = pts.map(&f);
    for _ in 0..iters {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (b, m, w) = (order[0], order[1], order[2]);
        let cen = [(pts[b][0] + pts[m][0]) / 2.0, (pts[b][1] + pts[m][1]) / 2.0];
        let at = |t: f64| [cen[0] + t * (pts[w][0] - cen[0]), cen[1] + t * (pts[w][1] - cen[1])];
        let r = at(-1.0);
        let fr = f(r);
        if fr < vals[b] {
            let e = at(-2.0);
            let fe = f(e);
            if fe < fr {
                pts[w] = e;
                vals[w] = fe;
            } else {
                pts[w] = r;
                vals[w] = fr;
            }
        } else if fr < vals[m] {
            pts[w] = r;
            vals[w] = fr;
        } else {
            let k = at(0.5);
            let fk = f(k);
            if fk < vals[w] {
                pts[w] = k;
                vals[w] = fk;
            } else {
                for i in [m, w] {
                    pts[i] = [(pts[i][0] + pts[b][0]) / 2.0, (pts[i][1] + pts[b][1]) / 2.0];
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    pts[best]
}

/// Best fit `f ≈ A e^{(ν_lin + α)x} sin(π(x−ℓ)/(2ℓ))` on the plateau.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauFit {
    pub alpha: C64,
    pub amplitude: C64,
    pub r2: f64,
    pub residual: f64,
}

/// Fits the exponent correction `α` (seeded at `alpha_seed`) and amplitude.
pub fn fit_plateau(xs: &[f64], f: &[C64], nu_lin: C64, alpha_seed: C64, ell: f64) -> PlateauFit {
    let misfit = |a: [f64; 2]| {
        let (_, r2, _) = fit_plateau_amplitude(xs, f, nu_lin + C64::new(a[0], a[1]), ell);
        1.0 - r2
    };
    let best = nelder_mead(misfit, [alpha_seed.re, alpha_seed.im], 0.01, 200);
    let alpha = C64::new(best[0], best[1]);
    let (amplitude, r2, residual) = fit_plateau_amplitude(xs, f, nu_lin + alpha, ell);
    PlateauFit { alpha, amplitude, r2, residual }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionProfile {
    pub grid: Vec<f64>,
    pub p: Vec<C64>,
    pub psi: Vec<C64>,
    /// Plateau amplitude of `p` (after rotating it to be real and positive).
    pub a: f64,
    /// Modulus of the plateau amplitude of `ψ`.
    pub b: f64,
    /// Complex plateau amplitude of `ψ` in the same phase gauge.
    pub b_fit: C64,
    /// Fitted exponent correction: `p ≈ A e^{(ν_lin + α)x} sin(π(x−ℓ)/(2ℓ))`.
    pub alpha_ell: C64,
    /// Exponent correction from the mean of the two central plateau roots.
    pub alpha_center: C64,
    pub fit_r2: f64,
    /// `max |p e^{−(ν_lin+α)x} − A sin(π(x−ℓ)/(2ℓ))| / |A|` over the plateau.
    pub plateau_residual: f64,
    pub exact: ExactEigenfunctions,
}

/// Eigenfunction and adjoint at a crossing, sampled on `grid`, with plateau fits.
///
/// Phase is fixed so the plateau amplitude of `p` is real and positive;
/// `⟨ψ, p⟩ = ∫ p ψ̄ = 1`.
pub fn eigenfunction_profiles(
    crossing: &CrossingData,
    params: &ModelParams,
    grid: &[f64],
) -> Result<EigenfunctionProfile, EvansError> {
    let ell = crossing.ell;
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= -ell && hi >= ell) {
        return Err(EvansError::Precondition(format!("grid [{lo}, {hi}] must cover [-{ell}, {ell}]")));
    }
    let pr = params.with_ell(ell).with_speed(crossing.c_star);
    let mut exact = exact_eigenfunctions(&pr, crossing.lambda_star)?;
    let ls = closed_form_spreading(pr.chi_plus).map_err(|e| EvansError::Precondition(e.to_string()))?;
    let nu_lin = ls.nu_lin();

    let n = 4001;
    let xs: Vec<f64> = (0..n).map(|i| -ell + 2.0 * ell * i as f64 / (n - 1) as f64).collect();
    let pv: Vec<C64> = xs.iter().map(|&x| exact.p(x, 0)).collect();
    let rp = spatial_roots(pr.chi_plus, pr.c, crossing.lambda_star)?.nu;
    let alpha_center = 0.5 * (rp[1] + rp[2]) - nu_lin;
    let fit = fit_plateau(&xs, &pv, nu_lin, alpha_center, ell);
    let (alpha_ell, amp, fit_r2, plateau_residual) = (fit.alpha, fit.amplitude, fit.r2, fit.residual);
    if !(fit_r2 >= MIN_FIT_R2) {
        return Err(EvansError::NormalizationFitFailure(fit_r2));
    }
    exact.rotate(amp.conj() / amp.norm());
    let psiv: Vec<C64> = xs.iter().map(|&x| exact.psi(x, 0)).collect();
    let (b_fit, _, _) = fit_plateau_amplitude(&xs, &psiv, -(nu_lin + alpha_ell).conj(), ell);
    Ok(EigenfunctionProfile {
        grid: grid.to_vec(),
        p: grid.iter().map(|&x| exact.p(x, 0)).collect(),
        psi: grid.iter().map(|&x| exact.psi(x, 0)).collect(),
        a: amp.norm(),
        b: b_fit.norm(),
        b_fit,
        alpha_ell,
        alpha_center,
        fit_r2,
        plateau_residual,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ratio_small_and_large() {
        let s = C64::new(1e-9, 2e-9);
        assert!((exp_ratio(s, 3.0) - 3.0).norm() < 1e-7);
        let s = C64::new(0.3, -0.2);
        assert!((exp_ratio(s, 2.0) - ((s * 2.0).exp() - 1.0) / s).norm() < 1e-14);
    }
}
