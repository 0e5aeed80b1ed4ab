//! Seeded, platform-independent random streams.
//!
//! Every random draw in the simulator (weight init, feedback matrices,
//! minibatch order, analog noise) comes from a ChaCha8 stream keyed by an
//! explicit seed. Independent streams are derived from a parent seed and a
//! path of integers, so work can be split without sharing generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a position path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stream labels so that different consumers of one run seed never collide.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const FEEDBACK: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const LUT: u64 = 5;
}
