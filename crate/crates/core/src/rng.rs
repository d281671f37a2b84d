//! Seed derivation. One global seed fans out into independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) type Rng = ChaCha8Rng;

/// SplitMix64 finalizer; mixes `seed` with a stream tag.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn stream(seed: u64, stream: u64) -> Rng {
    rng(derive_seed(seed, stream))
}

/// Stream tags; each consumer of a seed draws from its own stream.
pub(crate) mod tags {
    pub const GAUSSIAN: u64 = 1;
    pub const WALK: u64 = 2;
    pub const SGNS: u64 = 3;
    pub const LINE: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const SIM_SKILLS: u64 = 7;
    pub const SIM_STUDENT: u64 = 8;
    pub const SPLIT: u64 = 9;
}
