//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit seed and draws from
//! [`SimRng`] (ChaCha8). Parallel work is split into fixed-size blocks, each
//! with its own stream derived from `(seed, block)`, so results do not depend
//! on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all sampling.
pub type SimRng = ChaCha8Rng;

/// Name recorded in reports next to the seed.
pub const GENERATOR_NAME: &str = "ChaCha8Rng";

/// Number of draws handled by one independently seeded block.
pub const BLOCK_SIZE: usize = 1 << 14;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `index` derived from a parent seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Split `n` items into `(block_index, start, len)` chunks of [`BLOCK_SIZE`].
pub fn blocks(n: usize) -> impl Iterator<Item = (u64, usize, usize)> {
    (0..n.div_ceil(BLOCK_SIZE)).map(move |b| {
        let start = b * BLOCK_SIZE;
        (b as u64, start, BLOCK_SIZE.min(n - start))
    })
}
