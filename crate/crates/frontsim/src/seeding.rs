//! Reproducible stream derivation.
//!
//! Every worker stream is derived from the master seed by a fixed chain of
//! SplitMix64 finalizer steps over the run coordinates, independent of the
//! physical thread count:
//!
//! ```text
//! seed = sm(sm(sm(sm(master) ^ N) ^ engine_id) ^ stream_index)
//! ```
//!
//! where `sm` is [`splitmix64`]. The derived value seeds a ChaCha8 stream.
//! Replicate results are merged by stream index, so output bytes depend only
//! on `(config, seed, build)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer step.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Engine tag mixed into stream seeds so paired engines never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineTag {
    Counts = 0,
    Naive = 1,
    Coupled = 2,
}

/// Derive the seed for one worker stream.
pub fn stream_seed(master: u64, n: u64, engine: EngineTag, stream: u64) -> u64 {
    let s = splitmix64(master);
    let s = splitmix64(s ^ n);
    let s = splitmix64(s ^ engine as u64);
    splitmix64(s ^ stream)
}

/// ChaCha8 stream for one worker.
pub fn stream_rng(master: u64, n: u64, engine: EngineTag, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, n, engine, stream))
}
