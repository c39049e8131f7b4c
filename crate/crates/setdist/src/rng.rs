//! Seeding policy: every randomized routine takes a 64-bit seed and derives
//! independent sub-streams from it, so results are reproducible bit-for-bit
//! across runs, platforms and thread counts.
//!
//! The generator is ChaCha8, a counter-based stream cipher RNG. Sub-streams
//! use the cipher's 64-bit stream field, so stream `i` is statistically
//! independent of stream `j` for `i != j` under the same seed.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Name of the pinned RNG algorithm, recorded in configs and manifests.
pub const RNG_ALGORITHM: &str = "chacha8";

/// RNG for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for a named stage. SplitMix64 finalizer over the
/// (seed, tag) pair; used where a stage needs its own seed space rather
/// than a sub-stream (e.g. the per-replication seeds of a study run).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = stream_rng(42, 1).random();
        let b: f64 = stream_rng(42, 1).random();
        let c: f64 = stream_rng(42, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
