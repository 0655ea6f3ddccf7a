//! Per-path random streams.
//!
//! Each path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so the output of a simulation never depends on how paths are scheduled
//! across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for path `path` under the master `seed`.
pub fn path_stream(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}
