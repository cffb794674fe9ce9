//! Deterministic seed derivation.
//!
//! Every stochastic step in the toolkit draws from a ChaCha stream seeded
//! through these helpers, so a run is fully determined by its top-level seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a sub-seed from a base seed and a context tag.
///
/// Distinct tags give independent streams, so e.g. per-stage shuffles and
/// per-dataset generators never share state.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the base through SplitMix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h)
}

/// Build the toolkit's reference RNG from a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
