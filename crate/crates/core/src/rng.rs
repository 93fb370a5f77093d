//! Random number generation contract.
//!
//! Every random draw in this crate comes from ChaCha20 ([`ChaCha20Rng`])
//! seeded with `seed_from_u64(seed)`. Independent tasks (multi-start fits,
//! bootstrap replicates) each read their own ChaCha stream, selected with
//! [`ChaCha20Rng::set_stream`] from the task index, so results do not depend
//! on how tasks are scheduled across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha20Rng;

/// Generator for stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
