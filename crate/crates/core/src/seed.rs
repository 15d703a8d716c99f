//! Hierarchical seed derivation. Every random stream in a run is addressed by a
//! path of integer tags below the run seed, so results do not depend on the
//! order in which work items execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `parent` at the given tag path.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(parent), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn rng_at(parent: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, tags))
}

/// Stream labels used as the first tag below a run seed.
pub mod stream {
    pub const BASES: u64 = 1;
    pub const ROWS: u64 = 2;
    pub const PROBES: u64 = 3;
    pub const INSTANCE: u64 = 4;
    pub const CHECKS: u64 = 5;
}
