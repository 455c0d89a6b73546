//! Seeded random streams.
//!
//! All streams share the master seed and differ in their ChaCha stream id:
//! stream 0 feeds the data generator, stream `r + 1` replicate `r`, and the
//! last stream the timing probe.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn data_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 + 1);
    rng
}

pub fn probe_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}
