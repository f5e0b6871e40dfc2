//! Matching determinant for the plateau `[−ℓ, ℓ]`.
//!
//! With `U = (u, u_x, u_xx + χu, (u_xx + χu)_x)` continuous across the jumps,
//! an eigenfunction leaves `x = −ℓ` inside the unstable subspace of the
//! exterior system and must arrive at `x = ℓ` inside its stable subspace.
//! Both subspaces are two-dimensional, so the condition is the vanishing of
//! `Λ²Φ(w_u) ∧ w_s` where `w_u`, `w_s` are Plücker vectors and `Φ` is the
//! plateau flow over length `2ℓ`. The flow is applied in the eigenbasis of
//! the plateau system through the second compound matrix, so growth factors
//! `exp(2ℓ(ν_i + ν_j))` can be scaled against the largest one analytically.

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;

use super::{EvansError, EvansKind, EvansValue};
use crate::dispersion::{dispersion_dnu, spatial_roots, ModelParams};
use crate::scalar::{Dual, Scalar};

/// Index pairs labelling the Plücker coordinates.
const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Parameter for derivative evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Lambda,
    Speed,
}

/// Plücker vector of `span{e(a), e(b)}` divided by `b − a`.
///
/// The division makes it a symmetric polynomial in the pair, so it stays
/// analytic through collisions `a = b`.
pub fn matching_vectors<T: Scalar>(a: T, b: T, chi: f64) -> [T; 6] {
    let chi_t = T::from_re(chi);
    let s = a + b;
    let p = a * b;
    [
        T::one(),
        s,
        s * s - p + chi_t,
        p - chi_t,
        p * s,
        p * p - T::from_re(2.0 * chi) * p + chi_t * s * s + T::from_re(chi * chi),
    ]
}

fn eigvec<T: Scalar>(nu: T, chi: f64) -> [T; 4] {
    let q = nu * nu + T::from_re(chi);
    [T::one(), nu, q, nu * q]
}

/// Second compound of a 4×4 matrix given by columns.
fn compound<T: Scalar>(cols: &[[T; 4]; 4]) -> [[T; 6]; 6] {
    let mut out = [[T::zero(); 6]; 6];
    for (ii, &(i, j)) in PAIRS.iter().enumerate() {
        for (jj, &(k, l)) in PAIRS.iter().enumerate() {
            out[ii][jj] = cols[k][i] * cols[l][j] - cols[l][i] * cols[k][j];
        }
    }
    out
}

fn wedge<T: Scalar>(a: &[T; 6], b: &[T; 6]) -> T {
    a[0] * b[5] - a[1] * b[4] + a[2] * b[3] + a[3] * b[2] - a[4] * b[1] + a[5] * b[0]
}

/// Gaussian elimination with partial pivoting on the value part.
fn solve6<T: Scalar>(mut a: [[T; 6]; 6], mut b: [T; 6]) -> Option<[T; 6]> {
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|z| z.val().norm())
        .fold(0.0, f64::max);
    for k in 0..6 {
        let piv = (k..6)
            .max_by(|&i, &j| a[i][k].val().norm().total_cmp(&a[j][k].val().norm()))
            .unwrap();
        if !(a[piv][k].val().norm() > 1e-14 * scale) {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in (k + 1)..6 {
            let f = a[i][k] / a[k][k];
            for j in k..6 {
                let t = a[k][j];
                a[i][j] -= f * t;
            }
            let t = b[k];
            b[i] -= f * t;
        }
    }
    let mut x = [T::zero(); 6];
    for k in (0..6).rev() {
        let mut s = b[k];
        for j in (k + 1)..6 {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Some(x)
}

/// `Λ²Φ(w_u) ∧ w_s · exp(−2ℓ σ_ref)` from ordered plateau and exterior roots.
fn matching_core<T: Scalar>(
    ell: f64,
    chi_p: f64,
    chi_m: f64,
    nup: [T; 4],
    num: [T; 4],
    sigma_ref: C64,
) -> Option<T> {
    let wu = matching_vectors(num[0], num[1], chi_m);
    let ws = matching_vectors(num[2], num[3], chi_m);
    let cols = [
        eigvec(nup[0], chi_p),
        eigvec(nup[1], chi_p),
        eigvec(nup[2], chi_p),
        eigvec(nup[3], chi_p),
    ];
    let cm = compound(&cols);
    let mut z = solve6(cm, wu)?;
    let two_ell = C64::new(2.0 * ell, 0.0);
    for (zz, &(i, j)) in z.iter_mut().zip(PAIRS.iter()) {
        let sigma = nup[i] + nup[j];
        *zz *= (T::from_c(two_ell) * (sigma - T::from_c(sigma_ref))).exp();
    }
    let mut q = [T::zero(); 6];
    for i in 0..6 {
        for j in 0..6 {
            q[i] += cm[i][j] * z[j];
        }
    }
    Some(wedge(&q, &ws))
}

fn min_separation(r: &[C64; 4]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..4 {
        for j in (i + 1)..4 {
            m = m.min((r[i] - r[j]).norm());
        }
    }
    m
}

fn ill_conditioned(r: &[C64; 4]) -> bool {
    let big = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    min_separation(r) < 1e-5 * (1.0 + big)
}

fn plateau_system(chi: f64, c: f64, lambda: C64) -> Matrix4<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    Matrix4::new(
        z, one, z, z,
        C64::new(-chi, 0.0), z, one, z,
        z, z, z, one,
        -lambda, C64::new(c, 0.0), z, z,
    )
}

/// Matching determinant with the plateau flow applied in its eigenbasis.
///
/// Falls back to [`plateau_determinant_propagated`] when plateau roots nearly
/// collide.
pub fn plateau_determinant(params: &ModelParams, lambda: C64) -> Result<EvansValue, EvansError> {
    let rp = spatial_roots(params.chi_plus, params.c, lambda)?.nu;
    let rm = spatial_roots(params.chi_minus, params.c, lambda)?.nu;
    let log_scale = 2.0 * params.ell * (rp[0] + rp[1]).re;
    let flags = |value: C64, log_scale: f64| EvansValue {
        lambda,
        value,
        log_scale,
        kind: EvansKind::Plateau,
        on_absolute: (rp[1].re - rp[2].re).abs() < 1e-9,
        double_root_limit: false,
        hyperbolic: rm[1].re > 0.0 && rm[2].re < 0.0,
    };
    if !ill_conditioned(&rp) {
        let sigma_ref = C64::new((rp[0] + rp[1]).re, 0.0);
        if let Some(v) =
            matching_core(params.ell, params.chi_plus, params.chi_minus, rp, rm, sigma_ref)
        {
            return Ok(flags(v, log_scale));
        }
    }
    let prop = plateau_determinant_propagated(params, lambda)?;
    Ok(flags(prop.value, prop.log_scale))
}

/// Matching determinant by stepping the compound flow with renormalisation.
pub fn plateau_determinant_propagated(
    params: &ModelParams,
    lambda: C64,
) -> Result<EvansValue, EvansError> {
    let rp = spatial_roots(params.chi_plus, params.c, lambda)?.nu;
    let rm = spatial_roots(params.chi_minus, params.c, lambda)?.nu;
    let wu = matching_vectors(rm[0], rm[1], params.chi_minus);
    let ws = matching_vectors(rm[2], rm[3], params.chi_minus);
    let rho = rp.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = ((2.0 * params.ell * rho).ceil() as usize).max(1);
    let h = 2.0 * params.ell / n as f64;
    let step = (plateau_system(params.chi_plus, params.c, lambda) * C64::new(h, 0.0)).exp();
    let cols = [
        [step[(0, 0)], step[(1, 0)], step[(2, 0)], step[(3, 0)]],
        [step[(0, 1)], step[(1, 1)], step[(2, 1)], step[(3, 1)]],
        [step[(0, 2)], step[(1, 2)], step[(2, 2)], step[(3, 2)]],
        [step[(0, 3)], step[(1, 3)], step[(2, 3)], step[(3, 3)]],
    ];
    let cm = compound(&cols);
    let mut w = wu;
    let mut acc = 0.0;
    for _ in 0..n {
        let mut next = [C64::new(0.0, 0.0); 6];
        for i in 0..6 {
            for j in 0..6 {
                next[i] += cm[i][j] * w[j];
            }
        }
        let norm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EvansError::EigenbasisIllConditioned(lambda));
        }
        acc += norm.ln();
        w = next.map(|z| z / norm);
    }
    let log_scale = 2.0 * params.ell * (rp[0] + rp[1]).re;
    let value = wedge(&w, &ws) * (acc - log_scale).exp();
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(EvansError::EigenbasisIllConditioned(lambda));
    }
    Ok(EvansValue {
        lambda,
        value,
        log_scale,
        kind: EvansKind::Plateau,
        on_absolute: (rp[1].re - rp[2].re).abs() < 1e-9,
        double_root_limit: false,
        hyperbolic: rm[1].re > 0.0 && rm[2].re < 0.0,
    })
}

/// Value and derivative of `D(λ, c)·exp(−2ℓσ₀)` with respect to `wrt`.
///
/// `σ₀` is held fixed, so the function is analytic in `λ` and a Newton step
/// `f/f'` equals the step on the true determinant. Root derivatives follow
/// from `d(λ, ν(λ)) = 0`: `ν_λ = 1/d_ν` and `ν_c = −ν/d_ν`.
pub fn plateau_derivative(
    params: &ModelParams,
    lambda: C64,
    wrt: Param,
    sigma0: C64,
) -> Result<(C64, C64), EvansError> {
    let rp = spatial_roots(params.chi_plus, params.c, lambda)?.nu;
    let rm = spatial_roots(params.chi_minus, params.c, lambda)?.nu;
    let lift = |r: [C64; 4], chi: f64| {
        r.map(|nu| {
            let dn = dispersion_dnu(chi, params.c, nu);
            let d = match wrt {
                Param::Lambda => 1.0 / dn,
                Param::Speed => -nu / dn,
            };
            Dual::new(nu, d)
        })
    };
    if ill_conditioned(&rp) {
        return Err(EvansError::EigenbasisIllConditioned(lambda));
    }
    let v = matching_core(
        params.ell,
        params.chi_plus,
        params.chi_minus,
        lift(rp, params.chi_plus),
        lift(rm, params.chi_minus),
        sigma0,
    )
    .ok_or(EvansError::EigenbasisIllConditioned(lambda))?;
    Ok((v.v, v.d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plucker_vector_matches_minors() {
        let (a, b, chi) = (C64::new(0.3, 1.1), C64::new(-0.7, 0.2), -1.0);
        let (ea, eb) = (eigvec(a, chi), eigvec(b, chi));
        let w = matching_vectors(a, b, chi);
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            let minor = ea[i] * eb[j] - ea[j] * eb[i];
            assert!((minor / (b - a) - w[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn wedge_is_four_by_four_determinant() {
        let cols = [
            [C64::new(1.0, 0.2), C64::new(0.5, 0.0), C64::new(-1.0, 1.0), C64::new(2.0, 0.0)],
            [C64::new(0.0, 1.0), C64::new(1.5, -0.5), C64::new(0.3, 0.0), C64::new(-0.4, 0.1)],
            [C64::new(2.0, 0.0), C64::new(0.1, 0.1), C64::new(1.0, 0.0), C64::new(0.0, -1.0)],
            [C64::new(-0.3, 0.0), C64::new(0.2, 0.7), C64::new(0.0, 0.5), C64::new(1.0, 0.0)],
        ];
        let pl = |x: &[C64; 4], y: &[C64; 4]| {
            let mut w = [C64::new(0.0, 0.0); 6];
            for (k, &(i, j)) in PAIRS.iter().enumerate() {
                w[k] = x[i] * y[j] - x[j] * y[i];
            }
            w
        };
        let d = wedge(&pl(&cols[0], &cols[1]), &pl(&cols[2], &cols[3]));
        let m = Matrix4::from_fn(|i, j| cols[j][i]);
        assert!((d - m.determinant()).norm() < 1e-13);
    }

    #[test]
    fn eigenbasis_and_propagation_agree() {
        let p = ModelParams::default().with_ell(12.0).with_speed(1.5);
        for lambda in [C64::new(0.3, 1.0), C64::new(-0.1, 0.5), C64::new(1.0, -2.0)] {
            let a = plateau_determinant(&p, lambda).unwrap();
            let b = plateau_determinant_propagated(&p, lambda).unwrap();
            assert_eq!(a.log_scale, b.log_scale);
            assert!((a.value - b.value).norm() < 1e-8 * a.value.norm(), "{} {}", a.value, b.value);
        }
    }

    #[test]
    fn dual_derivative_matches_finite_difference() {
        let p = ModelParams::default().with_ell(15.0).with_speed(1.5);
        let lambda = C64::new(0.05, 1.1);
        let rp = spatial_roots(p.chi_plus, p.c, lambda).unwrap().nu;
        let s0 = rp[0] + rp[1];
        let (f, fl) = plateau_derivative(&p, lambda, Param::Lambda, s0).unwrap();
        let h = 1e-6;
        let fp = plateau_derivative(&p, lambda + h, Param::Lambda, s0).unwrap().0;
        let fm = plateau_derivative(&p, lambda - h, Param::Lambda, s0).unwrap().0;
        assert!(((fp - fm) / (2.0 * h) - fl).norm() < 1e-6 * fl.norm());
        let (_, fc) = plateau_derivative(&p, lambda, Param::Speed, s0).unwrap();
        let g = |c: f64| plateau_derivative(&p.with_speed(c), lambda, Param::Speed, s0).unwrap().0;
        assert!(((g(p.c + h) - g(p.c - h)) / (2.0 * h) - fc).norm() < 1e-6 * fc.norm());
        assert!(f.norm() > 0.0);
    }
}
