//! Seeded randomness shared by every stage.
//!
//! Each consumer gets its own ChaCha8 stream derived from `(seed, stream)`,
//! so work items can be generated in any order and still reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in dataset metadata and manifests.
pub const RNG_ALGORITHM: &str = "chacha8";

pub type Rng = ChaCha8Rng;

/// Independent generator for work item `stream` under a run seed.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based uniform in [0, 1) keyed by a tuple of integers.
///
/// Used for dropout masks, where every element must be addressable
/// without replaying a sequential stream.
pub fn keyed_uniform(keys: &[u64]) -> f64 {
    (keyed_u64(keys) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Hash a tuple of integers to a well-mixed 64-bit value.
pub fn keyed_u64(keys: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for &k in keys {
        h = splitmix64(h ^ k);
    }
    h
}
