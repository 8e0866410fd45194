//! Deterministic random-number plumbing.
//!
//! Every stochastic component of this crate draws from a ChaCha8 stream that
//! is derived from a user-visible `u64` seed through the documented mixing
//! below. Streams are keyed by purpose (a fixed salt) plus an index such as a
//! document content hash or a resample number, so independent units of work
//! own independent streams. This is what makes results reproducible
//! bit-for-bit regardless of execution order, including under the `rayon`
//! feature.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream salt for topic-assignment initialisation.
pub const SALT_INIT: u64 = 0x1157_0A11_0C00_0001;
/// Stream salt for per-sweep Gibbs resampling.
pub const SALT_SWEEP: u64 = 0x1157_0A11_0C00_0002;
/// Stream salt for held-out fold-in inference.
pub const SALT_FOLD_IN: u64 = 0x1157_0A11_0C00_0003;
/// Stream salt for synthetic corpus generation.
pub const SALT_SYNTH: u64 = 0x1157_0A11_0C00_0004;
/// Stream salt for bootstrap resampling.
pub const SALT_BOOTSTRAP: u64 = 0x1157_0A11_0C00_0005;

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Used to mix seed, salt
/// and index into one stream key.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a byte slice. Stable across platforms and releases, unlike
/// `std::hash`; used for content-keyed stream indices and corpus hashes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// FNV-1a over a token-id sequence (little-endian u32 encoding).
pub fn hash_token_ids(ids: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &id in ids {
        for b in id.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Derive the ChaCha8 stream for `(seed, salt, index)`.
///
/// The key is `splitmix64(splitmix64(seed ^ salt) ^ index)`; the stream is
/// then `ChaCha8Rng::seed_from_u64(key)`. Reference implementations in tests
/// re-derive streams through this same contract.
pub fn substream(seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ salt) ^ index);
    ChaCha8Rng::seed_from_u64(key)
}

/// Uniform f64 in [0, 1) from the top 53 bits of one `next_u64` draw.
pub fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` as `next_u64() % n`.
///
/// The modulo bias is below 2^-50 for every `n` used in this crate and is
/// accepted in exchange for a contract simple enough to re-derive in oracle
/// tests.
pub fn uniform_index<R: RngCore>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    (rng.next_u64() % n as u64) as usize
}

/// Sample an index from unnormalised non-negative weights by CDF walk.
/// Returns the last index when rounding pushes the draw past the total.
pub fn sample_weighted<R: RngCore>(rng: &mut R, weights: &[f64]) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    let target = unit_f64(rng) * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substream_is_reproducible() {
        let mut a = substream(42, SALT_SWEEP, 7);
        let mut b = substream(42, SALT_SWEEP, 7);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_across_salts_and_indices() {
        let mut a = substream(42, SALT_SWEEP, 7);
        let mut b = substream(42, SALT_SWEEP, 8);
        let mut c = substream(42, SALT_INIT, 7);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn unit_f64_in_range() {
        let mut rng = substream(1, SALT_BOOTSTRAP, 0);
        for _ in 0..1000 {
            let u = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn weighted_sampling_hits_only_positive_mass() {
        let mut rng = substream(3, SALT_SWEEP, 0);
        let w = [0.0, 2.0, 0.0, 1.0];
        for _ in 0..500 {
            let i = sample_weighted(&mut rng, &w);
            assert!(i == 1 || i == 3);
        }
    }

    #[test]
    fn fnv_matches_known_vectors() {
        // FNV-1a reference values: offset basis for empty input.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
