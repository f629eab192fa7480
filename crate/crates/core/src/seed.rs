//! Deterministic per-sample random streams.
//!
//! Every random decision in the pipeline is drawn from a generator seeded by
//! `sample_seed(global, question_id)` (optionally further split by a stream
//! label), so results never depend on shard layout or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function applied to `x + GOLDEN_GAMMA`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(global ^ splitmix64(key))`.
pub fn mix(global: u64, key: u64) -> u64 {
    splitmix64(global ^ splitmix64(key))
}

pub fn sample_seed(global: u64, question_id: u64) -> u64 {
    mix(global, question_id)
}

/// 64-bit FNV-1a, used to turn stream labels into integers.
pub fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Generator for one (sample, stream) pair.
pub fn sample_rng(global: u64, question_id: u64, stream: &str) -> SampleRng {
    SampleRng::seed_from_u64(mix(sample_seed(global, question_id), fnv1a(stream)))
}

pub fn rng_from_seed(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}
