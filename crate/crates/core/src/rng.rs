//! Seed derivation for independent random streams.
//!
//! Every simulation run draws from ChaCha8 streams keyed by
//! `master_seed ⊕ run_index`, with the ChaCha stream id selecting the
//! purpose (true model, environment noise, learner, baseline rollouts).
//! Runs therefore share no generator state and replay bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const TRUTH: u64 = 0;
pub const ENVIRONMENT: u64 = 1;
pub const LEARNER: u64 = 2;
pub const BASELINE: u64 = 3;

pub fn stream(master_seed: u64, run_index: u64, purpose: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ run_index);
    rng.set_stream(purpose);
    rng
}

/// Generator for a single seed with no run structure.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
