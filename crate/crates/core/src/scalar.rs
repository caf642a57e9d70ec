//! Floating-point scalar abstraction for the numerical kernels.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};
use rand::Rng;

/// Real scalar type the engines are generic over.
///
/// Beyond ordinary float arithmetic, engines need to draw standard
/// distributions in the native precision, so sampling hooks are part of the
/// trait rather than scattered call sites converting from `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Draw from the standard normal distribution N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw uniformly from the half-open interval [0, 1).
    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample(rand_distr::StandardNormal)
            }

            #[inline]
            fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.gen::<$t>()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Convert an `f64` constant into `T`, panicking only for non-finite inputs
/// that no supported scalar can represent.
#[inline]
pub(crate) fn from_f64<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}
