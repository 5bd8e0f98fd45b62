//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream keyed by a root seed mixed with the coordinates of the draw
//! (epoch, batch, sample, ...), so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of coordinates into a root seed.
pub fn derive(seed: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(seed), |acc, &c| mix(acc ^ mix(c)))
}

pub fn stream(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, coords))
}

// Domain tags keep streams for different purposes disjoint.
pub(crate) const TAG_INIT: u64 = 1;
pub(crate) const TAG_SHUFFLE: u64 = 2;
pub(crate) const TAG_DROPOUT: u64 = 3;
pub(crate) const TAG_GAUSS: u64 = 4;
pub(crate) const TAG_POISSON: u64 = 5;
pub(crate) const TAG_RANDOM_START: u64 = 6;
pub(crate) const TAG_DATA: u64 = 7;
