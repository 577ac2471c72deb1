//! Seeded random streams.
//!
//! Every random decision in the crate draws from ChaCha8 seeded through
//! [`stream`], so a `(seed, purpose)` pair always yields the same sequence on
//! every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids separating independent uses of one seed.
pub mod purpose {
    pub const DISCARD: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const SCENE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const BEAM_SELECT: u64 = 5;
    pub const PAIRING: u64 = 6;
}

/// ChaCha8 keyed by `seed`, on the stream reserved for `purpose`.
pub fn stream(seed: u64, purpose: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// SplitMix64 finalizer over `(seed, index)`; used to give each item of a
/// dataset its own seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
