//! Counter-addressed random streams.
//!
//! Every random draw in a chain comes from a stream addressed by
//! `(seed, iteration, slot)`. The stream is a ChaCha8 keystream keyed by
//! `seed`, with the iteration as the ChaCha stream id and the slot selecting
//! a disjoint 2^40-word window inside it. A worker can therefore rebuild its
//! generator from the counter alone, and results do not depend on which
//! thread ran which worker or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Slot reserved for the accept/reject uniform of an iteration.
pub const ACCEPT_SLOT: u64 = 1 << 20;

/// Iteration id used for drawing the initial tree.
pub const INIT_STREAM: u64 = u64::MAX;

const SLOT_WORDS_LOG2: u32 = 40;

pub fn stream_rng(seed: u64, iteration: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng.set_word_pos(u128::from(slot) << SLOT_WORDS_LOG2);
    rng
}

/// The accept/reject uniform for `iteration`, in `[0, 1)`.
pub fn accept_uniform(seed: u64, iteration: u64) -> f64 {
    stream_rng(seed, iteration, ACCEPT_SLOT).random::<f64>()
}
