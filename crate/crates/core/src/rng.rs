//! Seed plumbing. Every randomized operation takes one explicit `u64` seed and
//! expands it through SplitMix64 so that parallel tasks draw from independent,
//! scheduling-invariant streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 step: maps any 64-bit value to a well-mixed successor.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of tags (e.g. grid index, fold index).
///
/// The same `(base, tags)` pair always yields the same child seed, and distinct
/// tag paths yield decorrelated streams, so work items can run in any order.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// Deterministic generator for a seed; ChaCha8 keeps streams identical across platforms.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
