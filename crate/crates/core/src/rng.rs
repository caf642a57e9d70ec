//! Counter-based random streams for reproducible Monte Carlo ensembles.
//!
//! Every trajectory owns one [`RngStream`] addressed by `(master_seed,
//! stream_index)`. The draw sequence of a stream is a pure function of that
//! pair, so results do not depend on how trajectories are scheduled across
//! worker threads.

use crate::scalar::Scalar;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One independent, reproducible random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Stream `stream_index` of the ensemble seeded by `master_seed`.
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        Self { inner }
    }

    /// Standard normal draw in the scalar type `T`.
    #[inline]
    pub fn normal<T: Scalar>(&mut self) -> T {
        T::standard_normal(&mut self.inner)
    }

    /// Uniform draw from [0, 1) in the scalar type `T`.
    #[inline]
    pub fn uniform<T: Scalar>(&mut self) -> T {
        T::uniform_01(&mut self.inner)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    #[inline]
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
