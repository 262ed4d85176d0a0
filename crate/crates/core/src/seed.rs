//! Seed derivation. Every random stream in a run is a ChaCha8 generator keyed by
//! a seed derived from the run seed and a fixed tag, so streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags.
pub mod tags {
    pub const INIT: u64 = 1;
    pub const STEP: u64 = 2;
    pub const LABELED: u64 = 3;
    pub const UNLABELED_J: u64 = 4;
    pub const UNLABELED_K: u64 = 5;
    pub const DATA: u64 = 6;
    pub const SPLIT: u64 = 7;
}

/// SplitMix64 finalizer applied to `seed ^ tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z =
        (seed ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, tag: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Generator for one epoch of a seeded stream.
pub fn epoch_rng(seed: u64, epoch: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}
