//! Seed splitting.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit root seed and selected by a stream number, so independent purposes
//! (initialisation, collocation, simulation, ...) never share a sequence and
//! adding draws to one purpose never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod stream {
    pub const INIT: u64 = 1;
    pub const COLLOCATION: u64 = 2;
    pub const SIMULATION: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const BOUNDARY: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const DATASET: u64 = 7;
}

/// Generator for `stream` under `root`.
pub fn rng_for(root: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng
}

/// Derived 64-bit seed for sub-stream `index` of `stream`, via SplitMix64.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
