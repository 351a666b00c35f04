//! Seeded random number generation.
//!
//! Every random draw in the crate goes through ChaCha20 keyed by a 64-bit
//! seed. ChaCha20 is a counter-based stream cipher, so a given
//! `(seed, stream)` pair yields the same sequence on every platform, and
//! independent purposes (feature map, embedding noise, count noise, ...)
//! use distinct stream ids instead of ad-hoc seed arithmetic.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in model files so readers know which generator
/// produced the stored parameters.
pub const PRNG_NAME: &str = "chacha20/rand_chacha-0.9/ziggurat-normal-0.5";

/// Stream ids for the independent random purposes of one run.
pub mod stream {
    pub const FREQUENCIES: u64 = 0;
    pub const EMBEDDING_NOISE: u64 = 1;
    pub const COUNT_NOISE: u64 = 2;
    pub const INIT: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const SAMPLE: u64 = 5;
    pub const SUBSAMPLE: u64 = 6;
    pub const PAIRS: u64 = 7;
    pub const DATA: u64 = 8;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
