//! Evans functions of the front and back interfaces, the matching
//! determinant of the finite plateau, eigenvalue counting, crossing
//! location and eigenfunction profiles.

mod contour;
mod crossing;
mod plateau;
mod profile;

pub use contour::{count_eigs_in_box, CBox};
pub use crossing::{
    eigenvalue_near, expansion_crossing, expansion_crossing_uncorrected, find_hopf_crossing,
    find_hopf_crossing_from, CrossingData,
};
pub use plateau::{
    matching_vectors, plateau_derivative, plateau_determinant, plateau_determinant_propagated,
    Param,
};
pub use profile::{
    bilinear_integral, eigenfunction_profiles, exact_eigenfunctions, fit_plateau, fit_plateau_amplitude,
    EigenfunctionProfile, ExactEigenfunctions, PiecewiseExp, PlateauFit, MIN_FIT_R2,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{spatial_roots, DispersionError, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvansError {
    #[error("lambda = {0} lies on an essential-spectrum border")]
    OnEssentialSpectrum(C64),
    #[error("eigenbasis ill-conditioned and propagation failed at lambda = {0}")]
    EigenbasisIllConditioned(C64),
    #[error("argument principle: contour too coarse after maximal refinement near {0}")]
    ContourTooCoarse(C64),
    #[error("Newton did not converge: {0}")]
    NoConvergence(String),
    #[error("zero at lambda = {0} is not simple")]
    NotSimple(C64),
    #[error("null vector is degenerate (singular values {0:e}, {1:e})")]
    NullVectorDegenerate(f64, f64),
    #[error("plateau fit failed: R^2 = {0}")]
    NormalizationFitFailure(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvansKind {
    Front,
    Back,
    Plateau,
}

/// A determinant value; the true determinant is `value · exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvansValue {
    pub lambda: C64,
    pub value: C64,
    pub log_scale: f64,
    pub kind: EvansKind,
    /// `Re ν₂ = Re ν₃` for one of the families: the value is a one-sided limit.
    pub on_absolute: bool,
    /// A within-family double root was removed from the product.
    pub double_root_limit: bool,
    /// Exterior roots split 2/2 across the imaginary axis.
    pub hyperbolic: bool,
}

impl EvansValue {
    pub fn modulus(&self) -> f64 {
        self.value.norm() * self.log_scale.exp()
    }
}

fn essential_tol(nu: C64) -> f64 {
    1e-12 * (1.0 + nu.norm())
}

fn vandermonde(
    kind: EvansKind,
    params: &ModelParams,
    lambda: C64,
    check_essential: bool,
) -> Result<EvansValue, EvansError> {
    let rp = spatial_roots(params.chi_plus, params.c, lambda)?.nu;
    let rm = spatial_roots(params.chi_minus, params.c, lambda)?.nu;
    if check_essential && rp.iter().chain(rm.iter()).any(|z| z.re.abs() < essential_tol(*z)) {
        return Err(EvansError::OnEssentialSpectrum(lambda));
    }
    // unstable pair of one state with the stable pair of the other
    let nu = match kind {
        EvansKind::Front => [rp[0], rp[1], rm[2], rm[3]],
        EvansKind::Back => [rm[0], rm[1], rp[2], rp[3]],
        EvansKind::Plateau => {
            return Err(EvansError::Precondition("use plateau_determinant".into()))
        }
    };
    let mut value = C64::new(1.0, 0.0);
    let mut double_root_limit = false;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let f = nu[j] - nu[i];
            let within = (i, j) == (0, 1) || (i, j) == (2, 3);
            if within && f.norm() < 1e-8 * (1.0 + nu[i].norm()) {
                double_root_limit = true;
                continue;
            }
            value *= f;
        }
    }
    let abs_tol = 1e-9;
    let on_absolute =
        (rp[1].re - rp[2].re).abs() < abs_tol || (rm[1].re - rm[2].re).abs() < abs_tol;
    let hyperbolic = rm[1].re > 0.0 && rm[2].re < 0.0;
    Ok(EvansValue {
        lambda,
        value,
        log_scale: 0.0,
        kind,
        on_absolute,
        double_root_limit,
        hyperbolic,
    })
}

/// Front Evans function: Vandermonde determinant of `(ν₁⁺, ν₂⁺, ν₃⁻, ν₄⁻)`.
pub fn evans_front(params: &ModelParams, lambda: C64) -> Result<EvansValue, EvansError> {
    vandermonde(EvansKind::Front, params, lambda, true)
}

/// Back Evans function: Vandermonde determinant of `(ν₁⁻, ν₂⁻, ν₃⁺, ν₄⁺)`.
pub fn evans_back(params: &ModelParams, lambda: C64) -> Result<EvansValue, EvansError> {
    vandermonde(EvansKind::Back, params, lambda, true)
}

/// Same as [`evans_front`]/[`evans_back`] without the border check; used at `λ = 0`.
pub fn evans_unchecked(
    kind: EvansKind,
    params: &ModelParams,
    lambda: C64,
) -> Result<EvansValue, EvansError> {
    vandermonde(kind, params, lambda, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;

    fn eigvec(nu: C64, chi: f64) -> [C64; 4] {
        let q = nu * nu + chi;
        [C64::new(1.0, 0.0), nu, q, nu * q]
    }

    #[test]
    fn vandermonde_matches_eigenvector_determinant() {
        // det[e₁⁺ e₂⁺ e₃⁻ e₄⁻] = ±λ²·V / Πν² (row reduction with the dispersion relation)
        let p = ModelParams::default().with_speed(1.3);
        for lambda in [C64::new(0.7, 0.4), C64::new(-0.2, 1.9), C64::new(3.0, -0.5)] {
            let rp = spatial_roots(p.chi_plus, p.c, lambda).unwrap().nu;
            let rm = spatial_roots(p.chi_minus, p.c, lambda).unwrap().nu;
            let cols = [eigvec(rp[0], 1.0), eigvec(rp[1], 1.0), eigvec(rm[2], -1.0), eigvec(rm[3], -1.0)];
            let m = Matrix4::from_fn(|i, j| cols[j][i]);
            let det = m.determinant();
            let v = evans_front(&p, lambda).unwrap().value;
            let nus = [rp[0], rp[1], rm[2], rm[3]];
            let prod: C64 = nus.iter().map(|z| z * z).product();
            let predicted = lambda * lambda * v / prod;
            let rel = (det.norm() - predicted.norm()).abs() / det.norm();
            assert!(rel < 1e-10, "{det} vs {predicted}");
        }
    }

    #[test]
    fn front_and_back_nonzero_far_right_and_at_origin() {
        let p = ModelParams::default().with_speed(1.0);
        for lambda in [C64::new(12.0, 0.0), C64::new(15.0, 7.0)] {
            assert!(evans_front(&p, lambda).unwrap().value.norm() > 0.0);
            assert!(evans_back(&p, lambda).unwrap().value.norm() > 0.0);
        }
        let origin = C64::new(0.0, 0.0);
        assert!(matches!(evans_front(&p, origin), Err(EvansError::OnEssentialSpectrum(_))));
        for kind in [EvansKind::Front, EvansKind::Back] {
            assert!(evans_unchecked(kind, &p, origin).unwrap().value.norm() > 1e-3);
        }
    }
}
