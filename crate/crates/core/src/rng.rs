//! The single pseudo-random generator used everywhere in the crate.
//!
//! All randomness comes from ChaCha8 seeded with one 64-bit integer through
//! [`rand::SeedableRng::seed_from_u64`]. Independent trials of an experiment
//! draw from distinct ChaCha streams of the same seed, so results never
//! depend on how trials are scheduled across threads.
//!
//! Uniform symbols in `[0, n)` are drawn as the high 64 bits of
//! `next_u64() * n`. For `n` a power of two this is exact, and for nested
//! powers of two the coarser symbol is a function of the finer one: the same
//! seed produces channels at `Y = 4, 8, 16, ...` that refine each other.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Generator for trial `stream` of the experiment seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from `[0, n)`.
pub fn below(rng: &mut Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    ((rng.next_u64() as u128 * n as u128) >> 64) as u64
}

/// Uniform draw from `(0, 1]`.
pub fn unit_open0(rng: &mut Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}
