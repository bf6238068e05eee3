//! Deterministic, named RNG substreams.
//!
//! Every stochastic component (population draw, Monte Carlo replication,
//! per-site unit draw, bootstrap replicate) derives its own generator from a
//! master seed and a tag path, so results are bit-identical no matter how the
//! work is scheduled across threads.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

/// Tag for the population draw of a simulated multi-site experiment.
pub const STREAM_POPULATION: u64 = 0x01;
/// Tag for Monte Carlo replication `r`.
pub const STREAM_REPLICATION: u64 = 0x02;
/// Tag for site `s` within a replication.
pub const STREAM_SITE: u64 = 0x03;
/// Tag for bootstrap replicate `b`.
pub const STREAM_BOOTSTRAP: u64 = 0x04;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a generator for the substream identified by `tags` under `seed`.
///
/// Tags are mixed one at a time through SplitMix64, so `[a, b]` and `[b, a]`
/// produce unrelated streams.
pub fn substream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    ChaCha12Rng::seed_from_u64(state)
}
