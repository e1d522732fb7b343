//! Deterministic random streams.
//!
//! Every consumer derives its generator from `(seed, stream index)`, so a
//! batch computed on any thread sees the same numbers as in a serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 271_828;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
