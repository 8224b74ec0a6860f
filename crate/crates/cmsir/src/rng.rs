//! Seeding and stream-splitting rules.
//!
//! Everything random in this crate flows through a `ChaCha12` generator seeded
//! from a single `u64` and a stream id, so any artifact is reproducible from
//! `(seed, stream)`:
//!
//! * stream [`POPULATION_STREAM`] — degree-sequence sampling,
//! * stream [`SINGLE_RUN_STREAM`] — a standalone `simulate` run,
//! * stream [`replica_stream`]`(size_idx, replica)` — ensemble replicas.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const POPULATION_STREAM: u64 = u64::MAX;
pub const SINGLE_RUN_STREAM: u64 = 0;

/// Stream id for replica `replica` of the `size_idx`-th population size.
pub fn replica_stream(size_idx: usize, replica: usize) -> u64 {
    ((size_idx as u64 + 1) << 32) | replica as u64
}

/// The crate-wide generator for a given seed and stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
