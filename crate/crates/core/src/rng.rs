//! Deterministic random streams: one ChaCha8 stream per (seed, stream id),
//! so parallel work splits reproducibly regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_2024;

/// Independent stream `id` derived from `seed`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}
