//! Random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha`), whose output is
//! specified and identical across platforms. A run with repeat index `rd`
//! uses the stream seeded with `base_seed + rd`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for repeat `rd` of a run seeded with `base_seed`.
pub fn repeat_stream(base_seed: u64, rd: u64) -> Stream {
    stream(base_seed.wrapping_add(rd))
}

/// Independent sub-stream `index` of `seed` (used for per-rollout streams).
pub fn sub_stream(seed: u64, index: u64) -> Stream {
    let mut rng = stream(seed);
    rng.set_stream(index);
    rng
}
