//! Seeded randomness. Every stochastic routine takes an explicit RNG so runs
//! are reproducible from a single root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type KfpRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> KfpRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> KfpRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
