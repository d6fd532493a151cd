//! Counter-keyed uniform draws.
//!
//! Step `i` (1-based) of a path seeded with `seed` owns exactly two 64-bit words of
//! the ChaCha20 keystream, at word offset `4 (i - 1)` in 32-bit units. Lane 0 drives
//! the draw from the chosen prior, lane 1 drives randomized policies. Sequential
//! generation and random access therefore produce identical values.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Name recorded in run metadata.
pub const GENERATOR_NAME: &str = "chacha20-seed_from_u64-2x64-per-step";

const WORDS_PER_STEP: u128 = 4;

fn to_unit(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The two uniforms in `[0, 1)` owned by `step` (1-based) under `seed`.
pub fn step_uniforms(seed: u64, step: usize) -> [f64; 2] {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_word_pos(WORDS_PER_STEP * (step as u128 - 1));
    [to_unit(rng.next_u64()), to_unit(rng.next_u64())]
}

/// Sequential reader over the per-step uniforms.
pub struct StepStream {
    rng: ChaCha20Rng,
}

impl StepStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// Uniforms for the next step.
    pub fn next_step(&mut self) -> [f64; 2] {
        [to_unit(self.rng.next_u64()), to_unit(self.rng.next_u64())]
    }
}

/// Seed of replicate `r` in a batch started from `base`.
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    // splitmix64 finalizer so neighbouring replicates get unrelated keys
    let mut z = base.wrapping_add((r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
