//! Seed derivation and generator construction.
//!
//! Every random object in the crate is drawn from a `ChaCha8Rng` seeded with a
//! 64-bit value. Independent streams (trials, grid cells, the parts of one
//! trial) get their seed from [`derive_seed`], a SplitMix64 finalizer folded
//! over the master seed and a list of tags. Gaussian variates come from
//! `rand_distr::StandardNormal` (ziggurat), so a given seed yields the same
//! numbers on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the sub-stream of `master` identified by `tags`.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(master), |acc, &t| mix(acc ^ mix(t)))
}
