//! Deterministic per-task random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

/// Independent stream for `(seed, domain, index)`; the same triple always
/// yields the same sequence regardless of scheduling.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

pub mod domain {
    pub const QUT_NULL: u64 = 1;
    pub const SOURCES: u64 = 2;
    pub const SIMULATE: u64 = 3;
    pub const REPLICATE: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const ZERO_SCENE: u64 = 6;
}

/// One Poisson draw per intensity; non-positive intensities give zero.
pub fn poisson_image<R: rand::Rng + ?Sized>(mu: &[f64], rng: &mut R) -> Vec<f64> {
    mu.iter()
        .map(|&m| {
            if m > 0.0 {
                Poisson::new(m).map(|d| d.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Child seed for task `index` of `domain`, for APIs that take a plain seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, domain, index).next_u64()
}
