//! Linear and weakly nonlinear stability of Cahn-Hilliard fronts that
//! propagate into an unstable plateau behind a moving trigger.
//!
//! The model is `u_t = −(u_xx + χ(x − ct)u + γu³ − βu⁵)_xx` in the comoving
//! frame, with `χ = χ₊` on a plateau of half-length `ℓ` and `χ₋` outside.

pub mod absolute_spectrum;
pub mod banded;
pub mod branch_point;
pub mod discrete_operator;
pub mod dispersion;
pub mod evans;
pub mod hopf;
pub mod scalar;
pub mod simulate;

pub use num_complex::Complex64 as C64;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dispersion(#[from] dispersion::DispersionError),
    #[error(transparent)]
    Branch(#[from] branch_point::BranchError),
    #[error(transparent)]
    Absolute(#[from] absolute_spectrum::AbsError),
    #[error(transparent)]
    Evans(#[from] evans::EvansError),
    #[error(transparent)]
    Operator(#[from] discrete_operator::OperatorError),
    #[error(transparent)]
    Hopf(#[from] hopf::HopfError),
    #[error(transparent)]
    Simulation(#[from] simulate::SimError),
}
