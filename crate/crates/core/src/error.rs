//! Error type shared by all engine modules.

use thiserror::Error;

/// Errors from construction, validation, or integration.
///
/// Diagnostics are carried as `f64` so the error type stays independent of
/// the scalar the offending computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("matrix dimension {dim} not supported (expected 2, 3, 4, or 8)")]
    UnsupportedDimension { dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian: max |A - A^dag| entry is {max_asymmetry:.3e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("state vector is not normalized: |psi| = {norm:.12}")]
    NotNormalized { norm: f64 },

    #[error("density matrix trace is {trace:.12}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("density matrix has negative eigenvalue {value:.3e}")]
    NegativeEigenvalue { value: f64 },

    #[error("parameter `{name}` = {value} is invalid: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("spins {i} and {j} coincide at position {position}")]
    CoincidentPositions { i: usize, j: usize, position: f64 },

    #[error("Hamiltonian does not conserve excitation number: max cross-sector entry {max_leakage:.3e}")]
    NotExcitationConserving { max_leakage: f64 },

    #[error("time step too coarse: dt * max frequency = {product:.3e} (must stay below 0.1)")]
    ResolutionTooCoarse { product: f64 },

    #[error("density matrix trace drifted to {trace:.9} at t = {t:.6}")]
    TraceDrift { trace: f64, t: f64 },
}

pub type Result<T> = std::result::Result<T, CoreError>;
