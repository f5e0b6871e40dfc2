//! Cubic coefficient of the Hopf normal form at the first crossing, the
//! branch expansion and its direction.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch_point::closed_form_spreading;
use crate::discrete_operator::{build_operator, leading_pair, EigenPair, GridOperator, OperatorError};
use crate::dispersion::ModelParams;
use crate::evans::{
    find_hopf_crossing, fit_plateau, fit_plateau_amplitude, CrossingData, ExactEigenfunctions, MIN_FIT_R2,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopfError {
    #[error("near-singular quadratic solve at {0} (non-resonance violated)")]
    ResonantSolve(C64),
    #[error("plateau fit failed: R^2 = {0}")]
    NormalizationFitFailure(f64),
    #[error("eigen pair is not normalised")]
    NotNormalized,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `⟨ψ, p⟩ = 1` with the pair as given.
    InnerProduct,
    /// Plateau amplitudes `A, B > 0` with `A³B = e^{2μ_lin ℓ}`.
    EnvelopeFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Supercritical,
    Subcritical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfResult {
    pub theta_plus: C64,
    pub theta_minus: C64,
    /// `dRe λ*/d(−c)`, positive when lowering `c` destabilises.
    pub mu_prime: f64,
    /// Raw `dRe λ*/dc`.
    #[serde(rename = "dRe_dc")]
    pub d_re_dc: f64,
    /// `Re θ₊/μ′`; the branch sits at `c = c* − Υ_c r²`.
    pub upsilon_c: f64,
    /// `Im θ₊`; the branch frequency is `ω* + Υ_ω r²`.
    pub upsilon_omega: f64,
    pub direction: Direction,
    pub ell: f64,
    pub c_star: f64,
    pub omega_star: f64,
    pub normalization: Normalization,
    /// `θ₊` with the second derivative moved onto `ψ`.
    pub theta_plus_by_parts: C64,
    /// Plateau-fit quality of `p` (envelope gauge only; 1 otherwise).
    pub fit_r2: f64,
    pub sign_convention: String,
}

/// Second-order interactions `φ₊, φ₀, φ₋` and the `f''` profile that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModes {
    pub phi_plus: Vec<C64>,
    pub phi_zero: Vec<C64>,
    pub phi_minus: Vec<C64>,
    pub fpp: Vec<f64>,
}

impl QuadraticModes {
    pub fn zeros(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self { phi_plus: z.clone(), phi_zero: z.clone(), phi_minus: z, fpp: vec![0.0; n] }
    }
}

/// Fourth-order `∂ₓ²` with `f = 0` at the ends and even ghosts.
pub fn second_derivative(f: &[C64], h: f64) -> Vec<C64> {
    let n = f.len();
    let zero = C64::new(0.0, 0.0);
    let at = |j: i64| -> C64 {
        let big = n as i64 + 1;
        let mut j = j;
        if j <= 0 {
            j = -j;
        }
        if j >= big {
            j = 2 * big - j;
        }
        if j == 0 || j == big {
            zero
        } else {
            f[(j - 1) as usize]
        }
    };
    (0..n)
        .map(|i| {
            let j = i as i64 + 1;
            (-at(j - 2) + 16.0 * at(j - 1) - 30.0 * at(j) + 16.0 * at(j + 1) - at(j + 2)) / (12.0 * h * h)
        })
        .collect()
}

/// Unweighted eigenfunction and adjoint from a pair of a (possibly weighted) operator.
fn unweighted(op: &GridOperator, pair: &EigenPair) -> (Vec<C64>, Vec<C64>) {
    if op.eta == 0.0 {
        return (pair.v.clone(), pair.w.clone());
    }
    let wts = op.weights();
    let p = pair.v.iter().zip(&wts).map(|(v, w)| v / w).collect();
    let psi = pair.w.iter().zip(&wts).map(|(v, w)| v * w).collect();
    (p, psi)
}

/// Solves `(2iω − L)φ₊ = (f''p²)ₓₓ` and `−Lφ₀ = (f''|p|²)ₓₓ`; `φ₋ = conj φ₊`.
///
/// Returns zeros without solving when `f'' ≡ 0`.
pub fn solve_quadratic_modes(
    op: &GridOperator,
    pair: &EigenPair,
    omega: f64,
    fpp: &[f64],
) -> Result<QuadraticModes, HopfError> {
    if fpp.len() != op.n {
        return Err(HopfError::Precondition("f'' profile length differs from the grid".into()));
    }
    if fpp.iter().all(|&v| v == 0.0) {
        return Ok(QuadraticModes::zeros(op.n));
    }
    let (p, _) = unweighted(op, pair);
    let wts = if op.eta == 0.0 { vec![1.0; op.n] } else { op.weights() };
    let rhs_plus: Vec<C64> = p.iter().zip(fpp).map(|(a, f)| f * a * a).collect();
    let rhs_zero: Vec<C64> = p.iter().zip(fpp).map(|(a, f)| C64::new(f * a.norm_sqr(), 0.0)).collect();
    let solve = |shift: C64, rhs: Vec<C64>| -> Result<Vec<C64>, HopfError> {
        let b: Vec<C64> = second_derivative(&rhs, op.h).iter().zip(&wts).map(|(v, w)| -v * w).collect();
        let lu = op.shifted_lu(shift).map_err(|_| HopfError::ResonantSolve(shift))?;
        let x = lu.solve(&b);
        // (M − s)x = −rhs
        let mx = op.apply(&x);
        let res: f64 = mx.iter().zip(&x).zip(&b).map(|((m, xi), bi)| (m - shift * xi - bi).norm_sqr()).sum();
        let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum();
        let xn: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        if !(res.sqrt() <= 1e-8 * bn.sqrt()) || xn.sqrt() > 1e10 * bn.sqrt() {
            return Err(HopfError::ResonantSolve(shift));
        }
        Ok(x.iter().zip(&wts).map(|(v, w)| v / w).collect())
    };
    let phi_plus = solve(C64::new(0.0, 2.0 * omega), rhs_plus)?;
    let mut phi_zero = solve(C64::new(0.0, 0.0), rhs_zero)?;
    phi_zero.iter_mut().for_each(|z| z.im = 0.0);
    let phi_minus = phi_plus.iter().map(|z| z.conj()).collect();
    Ok(QuadraticModes { phi_plus, phi_zero, phi_minus, fpp: fpp.to_vec() })
}

/// `Σ h·g·conj(ψ)` with `g = (18γ p²p̄ + f''[pφ₀ + p̄φ₊])ₓₓ`, and the same with
/// the derivative moved to `ψ`.
fn theta_sums(p: &[C64], psi: &[C64], modes: &QuadraticModes, gamma: f64, h: f64) -> (C64, C64) {
    let n: Vec<C64> = p
        .iter()
        .enumerate()
        .map(|(i, a)| {
            18.0 * gamma * a * a * a.conj()
                + modes.fpp[i] * (a * modes.phi_zero[i] + a.conj() * modes.phi_plus[i])
        })
        .collect();
    let dn = second_derivative(&n, h);
    let direct: C64 = h * dn.iter().zip(psi).map(|(a, b)| a * b.conj()).sum::<C64>();
    let psi_c: Vec<C64> = psi.iter().map(|z| z.conj()).collect();
    let dpsi = second_derivative(&psi_c, h);
    let by_parts: C64 = h * n.iter().zip(&dpsi).map(|(a, b)| a * b).sum::<C64>();
    (direct, by_parts)
}

/// Cubic coefficients `θ±`, `μ′`, and branch data.
pub fn hopf_coefficient(
    op: &GridOperator,
    pair: &EigenPair,
    modes: &QuadraticModes,
    crossing: &CrossingData,
    normalization: Normalization,
) -> Result<HopfResult, HopfError> {
    if !pair.normalized {
        return Err(HopfError::NotNormalized);
    }
    let gamma = op.params.gamma;
    let (p, psi) = unweighted(op, pair);
    let (mut theta_plus, mut by_parts) = theta_sums(&p, &psi, modes, gamma, op.h);
    // conjugate mode with its own adjoint
    let pc: Vec<C64> = p.iter().map(|z| z.conj()).collect();
    let psic: Vec<C64> = psi.iter().map(|z| z.conj()).collect();
    let conj_modes = QuadraticModes {
        phi_plus: modes.phi_minus.clone(),
        phi_zero: modes.phi_zero.clone(),
        phi_minus: modes.phi_plus.clone(),
        fpp: modes.fpp.clone(),
    };
    let (mut theta_minus, _) = theta_sums(&pc, &psic, &conj_modes, gamma, op.h);
    let mut fit_r2 = 1.0;
    if normalization == Normalization::EnvelopeFit {
        let ls = closed_form_spreading(op.params.chi_plus).map_err(|e| HopfError::Precondition(e.to_string()))?;
        let nu_lin = ls.nu_lin();
        let ell = op.params.ell;
        let xs = op.x();
        let rp = crate::dispersion::spatial_roots(op.params.chi_plus, crossing.c_star, pair.lambda)
            .map_err(|e| HopfError::Precondition(e.to_string()))?
            .nu;
        let seed = 0.5 * (rp[1] + rp[2]) - nu_lin;
        let fit = fit_plateau(&xs, &p, nu_lin, seed, ell);
        fit_r2 = fit.r2;
        if !(fit.r2 >= MIN_FIT_R2) {
            return Err(HopfError::NormalizationFitFailure(fit.r2));
        }
        let (b_fit, _, _) = fit_plateau_amplitude(&xs, &psi, -(nu_lin + fit.alpha).conj(), ell);
        let s = fit.amplitude.inv();
        let t = C64::new((2.0 * ls.mu_lin * ell).exp(), 0.0) / b_fit;
        let factor = s * s * s.conj() * t.conj();
        theta_plus *= factor;
        by_parts *= factor;
        theta_minus *= factor.conj();
    }
    let mu_prime = -crossing.d_re_dc;
    let upsilon_c = theta_plus.re / mu_prime;
    Ok(HopfResult {
        theta_plus,
        theta_minus,
        mu_prime,
        d_re_dc: crossing.d_re_dc,
        upsilon_c,
        upsilon_omega: theta_plus.im,
        direction: if theta_plus.re > 0.0 { Direction::Supercritical } else { Direction::Subcritical },
        ell: crossing.ell,
        c_star: crossing.c_star,
        omega_star: crossing.lambda_star.im,
        normalization,
        theta_plus_by_parts: by_parts,
        fit_r2,
        sign_convention: "mu_prime = -dRe(lambda*)/dc; bifurcation parameter c* - c; supercritical iff Re theta_plus > 0".into(),
    })
}

/// `−27γ(2ν_lin + ν̄_lin)²/(8μ_lin)`.
pub fn leading_order_theta(alpha: f64, gamma: f64) -> C64 {
    let ls = closed_form_spreading(alpha).expect("alpha > 0");
    let nu = ls.nu_lin();
    let s = 2.0 * nu + nu.conj();
    -27.0 * gamma * s * s / (8.0 * ls.mu_lin)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub r: f64,
    pub c: f64,
    pub omega: f64,
}

/// `c(r) = c* − Υ_c r²`, `ω(r) = ω* + Υ_ω r²`.
pub fn branch_prediction(result: &HopfResult, r_grid: &[f64]) -> Vec<BranchSample> {
    r_grid
        .iter()
        .map(|&r| BranchSample {
            r,
            c: result.c_star - result.upsilon_c * r * r,
            omega: result.omega_star + result.upsilon_omega * r * r,
        })
        .collect()
}

/// Everything computed at the first crossing by [`hopf_at_crossing`].
#[derive(Clone, Debug)]
pub struct HopfRun {
    pub crossing: CrossingData,
    pub op: GridOperator,
    pub pair: EigenPair,
    pub modes: QuadraticModes,
    pub result: HopfResult,
}

/// Crossing for `params.ell` (speed ignored), grid operator on
/// `[−ℓ − margin, ℓ + margin]` at `c*`, the leading pair scaled to
/// `h Σ|p|² = 1`, quadratic modes about the zero front, and `θ±`.
pub fn hopf_at_crossing(
    params: &ModelParams,
    h: f64,
    margin: f64,
    normalization: Normalization,
) -> Result<HopfRun, crate::Error> {
    let crossing = find_hopf_crossing(params)?;
    let p = params.with_speed(crossing.c_star);
    let op = build_operator(&p, p.ell + margin, h)?;
    let pair = leading_pair(&op, crossing.lambda_star)?;
    let norm = op.inner(&pair.v, &pair.v).re.sqrt();
    let pair = pair.rescaled(C64::new(1.0 / norm, 0.0));
    // f''(0) = 0 for f(u) = χu + γu³ − βu⁵
    let modes = solve_quadratic_modes(&op, &pair, pair.lambda.im, &vec![0.0; op.n])?;
    let result = hopf_coefficient(&op, &pair, &modes, &crossing, normalization)?;
    Ok(HopfRun { crossing, op, pair, modes, result })
}

/// `18γ ∫ p²p̄ conj(ψ'')` from the exact profiles, by composite Gauss-Legendre
/// quadrature on each smooth piece, truncated `tail` beyond `±ℓ`.
pub fn theta_from_exact(exact: &ExactEigenfunctions, gamma: f64, tail: f64, panels: usize) -> C64 {
    let ell = exact.p.ell;
    let pieces = [(-ell - tail, -ell), (-ell, ell), (ell, ell + tail)];
    // 5-point Gauss-Legendre
    let nodes = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    let weights = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mut total = C64::new(0.0, 0.0);
    for (a, b) in pieces {
        let w = (b - a) / panels as f64;
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * w;
            for (t, wt) in nodes.iter().zip(&weights) {
                // stay inside the piece so the correct branch is used
                let x = (mid + 0.5 * w * t).clamp(a + 1e-13, b - 1e-13);
                let pv = exact.p(x, 0);
                let v = pv * pv * pv.conj() * exact.psi(x, 2).conj();
                total += 0.5 * w * wt * v;
            }
        }
    }
    18.0 * gamma * total
}

/// `∫|p|²` of the exact profile.
pub fn exact_norm_sqr(exact: &ExactEigenfunctions) -> f64 {
    crate::evans::bilinear_integral(&exact.p, &exact.p.conj()).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_value_and_signs() {
        let t = leading_order_theta(1.0, 1.0);
        assert!((t.re + 1.141_420_198_256_433_3).abs() < 1e-12, "{t}");
        assert!((t.im + 17.011_433_276_598_946).abs() < 1e-10, "{t}");
        for g in [1.0, -1.0, 0.3, -0.3] {
            assert_eq!(leading_order_theta(1.0, g).re.signum(), -g.signum());
        }
        assert_eq!(leading_order_theta(1.0, 0.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn second_derivative_exact_on_quartic_interior() {
        let h = 0.1;
        let f: Vec<C64> = (1..50).map(|i| C64::new((i as f64 * h).powi(4), 0.0)).collect();
        let d = second_derivative(&f, h);
        let x = 20.0 * h;
        assert!((d[19].re - 12.0 * x * x).abs() < 1e-8);
    }
}
