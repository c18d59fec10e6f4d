//! Counter-based seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from
//! `derive_seed(base, tags)`, where `tags` names the consumer (trial index,
//! tree level, coset index, ...). Streams are therefore independent of
//! evaluation order and thread count, and stable across platforms: the mixing
//! is SplitMix64 and `seed_from_u64` is specified by `rand_core`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

// Domain tags. Values are part of the reproducibility contract; do not renumber.
pub const TAG_NORM: u64 = 0x4e4f_524d;
pub const TAG_COEFF: u64 = 0x434f_4546;
pub const TAG_NOISE: u64 = 0x4e4f_4953;
pub const TAG_CORRUPT: u64 = 0x4352_5054;
pub const TAG_TRIAL: u64 = 0x5452_4c;
pub const TAG_VERIFY: u64 = 0x5645_5246;
pub const TAG_PLANT: u64 = 0x504c_4e54;
pub const TAG_BASE: u64 = 0x4241_5345;
pub const TAG_SHIFTED: u64 = 0x5348_4654;
pub const TAG_COORD: u64 = 0x434f_4f52;
pub const TAG_LIFT: u64 = 0x4c49_4654;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a tag path into a base seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = mix64(base.wrapping_add(GOLDEN));
    for (i, &t) in tags.iter().enumerate() {
        h = mix64(h ^ mix64(t.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 2))));
    }
    h
}

pub fn stream(base: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, tags))
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
pub fn unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A keyed pure function of `(seed, index)`: the same pair always yields the same
/// word. Randomized oracles use it instead of a memo table.
#[inline]
pub fn prf(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ GOLDEN) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_stable() {
        // Frozen so that a change to the derivation is caught.
        assert_eq!(derive_seed(0, &[]), mix64(GOLDEN));
        let a: Vec<u64> = (0..4).map(|_| stream(7, &[1, 2]).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn tags_separate_streams() {
        let s = [derive_seed(1, &[1, 2]), derive_seed(1, &[2, 1]), derive_seed(1, &[1]), derive_seed(2, &[1, 2])];
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn unit_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn prf_bits_are_balanced() {
        let ones: u32 = (0..10_000u64).map(|i| (prf(3, i) & 1) as u32).sum();
        assert!((4700..5300).contains(&ones), "{ones}");
    }
}
