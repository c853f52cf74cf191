//! Reproducible random probes.
//!
//! All randomness derives from a single user seed. Each probe gets its own
//! ChaCha8 stream (`stream = probe index`), so probe sets do not depend on
//! how work is scheduled across threads.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn probe_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform samples in [-1, 1).
pub fn uniform_vec(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut rng = probe_rng(seed, stream);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}
