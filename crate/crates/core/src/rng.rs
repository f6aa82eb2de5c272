//! Seed derivation. Every random consumer gets its own ChaCha stream keyed by
//! the master seed, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a sub-stream is used for within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Network = 0,
    Types = 1,
    Seed = 2,
    Spread = 3,
}

/// Trial index reserved for the shared network in reuse-network mode.
pub const SHARED_TRIAL: u64 = (1 << 48) - 1;

/// Independent generator for `(trial, redraw, purpose)` under `master`.
pub fn substream(master: u64, trial: u64, redraw: u8, purpose: Purpose) -> SimRng {
    debug_assert!(trial < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((trial << 16) | ((redraw as u64) << 8) | purpose as u64);
    rng
}
