//! Seeded random streams.
//!
//! Every sampler draws from ChaCha20 (a counter-based generator with a fixed,
//! platform-independent output stream) seeded through `seed_from_u64`.
//! Uniform doubles use the standard 53-bit mantissa construction on [0, 1);
//! normal variates use `rand_distr::StandardNormal` (ziggurat).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub struct Stream(ChaCha20Rng);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform on [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
}
