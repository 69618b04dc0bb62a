//! Per-component random streams derived from one experiment seed.
//!
//! Each component (environment noise, exploration, initialization, replay
//! sampling, ...) gets its own ChaCha stream selected by hashing a string key,
//! so adding a component never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn stable_hash(key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn component_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stable_hash(key));
    rng
}

/// Stream for the `index`-th item of a keyed family, e.g. instance 17 of a
/// randomized theorem sweep.
pub fn indexed_rng(seed: u64, key: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(stable_hash(key));
    rng
}
