//! Seeding for reproducible simulation streams.
//!
//! Every simulation owns a ChaCha8 generator. Replication `i` of a run with
//! master seed `s` is seeded with `substream_seed(s, i)`, a SplitMix64-style
//! mix of both words, so replications can execute in any order or in
//! parallel and still draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id used for the graph/chain transitions.
pub const STREAM_PROCESS: u64 = 0;
/// Stream id used to realize random vertex-step indicators.
pub const STREAM_STEPS: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master`.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Generator for `seed` positioned on stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
