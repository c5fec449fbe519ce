//! Keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is built from
//! `(seed, replicate, lane)`. Work split over replicates therefore produces
//! the same numbers regardless of how replicates are scheduled on threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Lane used for the default stream of a single draw.
pub const LANE_MAIN: u64 = 0;
/// Lane for mark draws in marked processes.
pub const LANE_MARKS: u64 = 0x4d41_524b;
/// Lane for pilot samples that estimate quantile scalings.
pub const LANE_PILOT: u64 = 0x5049_4c54;

const DOMAIN: u64 = 0x6d6f_2d70_6f69_6e74;

/// Independent generator for the given key.
pub fn stream(seed: u64, replicate: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    key[16..24].copy_from_slice(&lane.to_le_bytes());
    key[24..32].copy_from_slice(&DOMAIN.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw on `(0, 1]`, safe for `u.powf(-1/alpha)` and `ln(u)`.
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
