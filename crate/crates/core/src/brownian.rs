//! Stochastic motion of the mediator spin: reflected Brownian position
//! updates, plus the underdamped Langevin variant with inertia.
//!
//! Both steppers are exact in law for any step size: the overdamped update
//! folds a free Gaussian increment into the wall interval (method of images),
//! and the underdamped update draws the joint Ornstein-Uhlenbeck increment of
//! `(x, v)` with its exact covariance.

use crate::error::{CoreError, Result};
use crate::rng::RngStream;
use crate::scalar::{from_f64, Scalar};

/// Parameters of the mediator's stochastic motion.
///
/// The velocity equation is `dv = -v/tau dt + sqrt(w) dW` with
/// `w = 2 D / tau^2`, so the long-time position diffusivity is `D`
/// independent of `tau`. `tau = 0` selects the overdamped limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LangevinParams<T: Scalar> {
    pub diffusivity: T,
    pub tau: T,
    pub wall_lo: T,
    pub wall_hi: T,
}

impl<T: Scalar> LangevinParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.diffusivity >= T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "diffusivity",
                value: self.diffusivity.to_f64().unwrap_or(f64::NAN),
                constraint: "must be non-negative",
            });
        }
        if !(self.tau >= T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "tau",
                value: self.tau.to_f64().unwrap_or(f64::NAN),
                constraint: "must be non-negative",
            });
        }
        if !(self.wall_lo < self.wall_hi) {
            return Err(CoreError::InvalidParameter {
                name: "wall_lo",
                value: self.wall_lo.to_f64().unwrap_or(f64::NAN),
                constraint: "must lie below wall_hi",
            });
        }
        Ok(())
    }
}

/// Fold `x` into `[lo, hi]` by repeated mirror reflection. The flag reports
/// an odd number of reflections (a velocity must flip sign in that case).
#[inline]
fn fold<T: Scalar>(x: T, lo: T, hi: T) -> (T, bool) {
    let width = hi - lo;
    let period = width + width;
    let mut y = (x - lo) % period;
    if y < T::zero() {
        y += period;
    }
    if y <= width {
        (lo + y, false)
    } else {
        (lo + (period - y), true)
    }
}

/// Mirror-reflect `x` into the interval `[lo, hi]`.
pub fn reflect<T: Scalar>(x: T, lo: T, hi: T) -> T {
    fold(x, lo, hi).0
}

/// One overdamped step: `x' = reflect(x + sqrt(2 D dt) n)`.
///
/// Exact in law for reflected Brownian motion at any `dt`.
pub fn overdamped_step<T: Scalar>(
    x: T,
    dt: T,
    params: &LangevinParams<T>,
    stream: &mut RngStream,
) -> T {
    let sigma = (from_f64::<T>(2.0) * params.diffusivity * dt).sqrt();
    let n: T = stream.normal();
    reflect(x + sigma * n, params.wall_lo, params.wall_hi)
}

/// Precomputed coefficients for the exact joint `(x, v)` update over one
/// fixed step `dt`.
#[derive(Clone, Copy, Debug)]
pub struct OuStepper<T: Scalar> {
    params: LangevinParams<T>,
    decay: T,
    drift: T,
    sigma_v: T,
    cov_over_sigma_v: T,
    sigma_x_resid: T,
}

impl<T: Scalar> OuStepper<T> {
    pub fn new(params: &LangevinParams<T>, dt: T) -> Result<Self> {
        params.validate()?;
        if !(params.tau > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "tau",
                value: params.tau.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive for the underdamped stepper",
            });
        }
        if !(dt > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "dt",
                value: dt.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        let tau = params.tau;
        let w = from_f64::<T>(2.0) * params.diffusivity / (tau * tau);
        let e1 = (-dt / tau).exp();
        let e2 = e1 * e1;
        let one = T::one();
        let half = from_f64::<T>(0.5);
        let var_v = w * tau * half * (one - e2);
        let var_x =
            w * tau * tau * (dt - (tau + tau) * (one - e1) + tau * half * (one - e2));
        let cov = w * tau * tau * half * (one - e1) * (one - e1);
        let sigma_v = var_v.sqrt();
        let cov_over_sigma_v = if sigma_v > T::zero() { cov / sigma_v } else { T::zero() };
        let resid = (var_x - cov_over_sigma_v * cov_over_sigma_v).max(T::zero());
        Ok(Self {
            params: *params,
            decay: e1,
            drift: tau * (one - e1),
            sigma_v,
            cov_over_sigma_v,
            sigma_x_resid: resid.sqrt(),
        })
    }

    /// Advance `(x, v)` by one step, reflecting at the walls with an elastic
    /// velocity flip on odd reflection parity.
    #[inline]
    pub fn step(&self, x: T, v: T, stream: &mut RngStream) -> (T, T) {
        let n1: T = stream.normal();
        let n2: T = stream.normal();
        let xi_v = self.sigma_v * n1;
        let xi_x = self.cov_over_sigma_v * n1 + self.sigma_x_resid * n2;
        let new_v = v * self.decay + xi_v;
        let free_x = x + v * self.drift + xi_x;
        let (folded, flipped) = fold(free_x, self.params.wall_lo, self.params.wall_hi);
        (folded, if flipped { -new_v } else { new_v })
    }
}

/// One underdamped step without a prepared stepper (test convenience).
pub fn langevin_step<T: Scalar>(
    x: T,
    v: T,
    dt: T,
    params: &LangevinParams<T>,
    stream: &mut RngStream,
) -> Result<(T, T)> {
    Ok(OuStepper::new(params, dt)?.step(x, v, stream))
}
