//! Gaussian sources for path generation.
//!
//! The production source is ChaCha20 (`rand_chacha`), a counter-based
//! generator: the seed selects the key and each path coordinate reads its
//! own stream (`set_stream(coordinate)`), so coordinate `i` of a seeded path
//! does not depend on how many coordinates were drawn before it. Normals
//! come from `rand_distr::StandardNormal` (ziggurat), consumed in grid order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Name recorded in path labels and reports.
pub const GENERATOR_NAME: &str = "chacha20-ziggurat";

/// A source of i.i.d. standard normal draws, one stream per coordinate.
pub trait GaussianSource {
    /// Fill `out` with standard normals from the stream of `coordinate`.
    fn fill_standard_normal(&mut self, coordinate: usize, out: &mut [f64]);
}

/// Seeded ChaCha20 source.
#[derive(Debug, Clone)]
pub struct ChaChaGaussian {
    seed: u64,
}

impl ChaChaGaussian {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Raw ChaCha20 stream for `stream`; also used for sampling schedules.
    pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}

impl GaussianSource for ChaChaGaussian {
    fn fill_standard_normal(&mut self, coordinate: usize, out: &mut [f64]) {
        let mut rng = Self::stream(self.seed, coordinate as u64);
        for z in out.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
    }
}

/// Stub source returning zeros; used to check generators' deterministic parts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroGaussian;

impl GaussianSource for ZeroGaussian {
    fn fill_standard_normal(&mut self, _coordinate: usize, out: &mut [f64]) {
        out.fill(0.0);
    }
}
