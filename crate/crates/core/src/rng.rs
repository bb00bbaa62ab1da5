//! Seeding conventions.
//!
//! Every stochastic routine takes a 64-bit seed and draws from ChaCha8.
//! Independent streams (subjects, folds, permutation blocks) are derived by
//! xor-ing the stream index into the master seed, so results never depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of `seed` (subjects, folds).
pub fn substream(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Stream derived from `seed` for a named purpose, so that e.g. epoch
/// shuffles never collide with subject or fold streams.
pub fn tagged(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod tags {
    pub const SHUFFLE: u64 = 1;
    pub const INIT: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const PFI: u64 = 5;
    pub const ICA: u64 = 6;
    pub const SHOTS: u64 = 7;
}
