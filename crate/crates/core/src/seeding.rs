//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a 64-bit value mixed with SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for a named stream.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// Streams carved out of one episode seed.
pub mod stream {
    pub const QUERIES: u64 = 1;
    pub const AGENTS: u64 = 2;
    pub const ROUTING: u64 = 3;
    pub const CHILD_QUERIES: u64 = 4;
    pub const WORLD: u64 = 5;
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
