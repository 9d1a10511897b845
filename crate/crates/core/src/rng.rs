//! Seed derivation. Every parallel unit of work (restart, tree, fold, class)
//! gets its own generator derived from the master seed and its index, so
//! results do not depend on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a stream tag and an index into a master seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Stream tags, one per consumer of randomness.
pub mod stream {
    pub const KMEANS: u64 = 1;
    pub const SMOTE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const MDA: u64 = 6;
    pub const MODEL: u64 = 7;
}
