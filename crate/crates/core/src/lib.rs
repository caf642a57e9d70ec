//! Monte Carlo engines for entanglement witness statistics of small spin systems.
//!
//! Two sources of randomness are covered by separate engines:
//!
//! * [`classical`]: a pair of coupled spins whose interaction strength is driven
//!   by the Brownian motion of a third, detuned spin. Each stochastic coupling
//!   record yields one realization of the susceptibility witness.
//! * [`quantum`]: spontaneous-emission trajectories of a two-qubit state under
//!   a photodetection unraveling, with per-trajectory concurrence and
//!   collective-spin statistics.
//!
//! Everything is generic over the floating-point scalar through [`Scalar`];
//! `f64` aliases for the common types live at the crate root.

pub mod brownian;
pub mod classical;
pub mod error;
pub mod linalg;
pub mod quantum;
pub mod rng;
pub mod scalar;
pub mod spin;
pub mod witness;

pub use error::CoreError;
pub use scalar::Scalar;

/// Complex double-precision scalar.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix over `f64`.
pub type CMatrix64 = linalg::CMatrix<f64>;
/// Dense complex vector over `f64`.
pub type CVector64 = linalg::CVector<f64>;
/// Reproducible per-trajectory random stream (the only RNG used by the engines).
pub type Stream = rng::RngStream;
