//! Seed derivation.
//!
//! A trial owns one 64-bit seed. Every consumer of randomness inside the
//! trial reads from its own ChaCha8 stream, selected by a purpose label and an
//! index, so adding agents or reordering work never shifts another stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Per-agent pair selection.
    Selection = 1,
    /// Agent ordering for the conflict-free sampler.
    Permutation = 2,
    /// Environment outcomes, consumed in canonical pair order.
    Environment = 3,
    /// Choice of the surviving update among conflicting proposers.
    ConflictResolution = 4,
}

pub fn stream(trial_seed: u64, purpose: Purpose, index: u32) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}

const TRIAL_SEED_STREAM: u64 = u64::MAX;

/// Seed of trial `index` under `master_seed`.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(TRIAL_SEED_STREAM);
    // two 32-bit words per u64
    rng.set_word_pos(index as u128 * 2);
    rng.next_u64()
}
