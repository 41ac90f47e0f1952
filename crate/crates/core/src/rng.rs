//! Seed derivation. Every random quantity is drawn from a ChaCha stream
//! keyed by `(seed, label)`, so streams never overlap and adding draws to one
//! quantity (say, more rows of `X`) leaves the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    BetaStar = 1,
    Design = 2,
    Coefficients = 3,
    Noise = 4,
    Subsample = 5,
    MonteCarlo = 6,
}

pub fn stream(seed: u64, label: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

/// Stream for chunk `chunk` of a chunked Monte-Carlo loop.
pub fn chunk_stream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((Stream::MonteCarlo as u64) << 32 | chunk);
    rng
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a master seed with a sequence of indices into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(1))))
}
