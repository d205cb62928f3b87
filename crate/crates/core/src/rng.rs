//! Counter-based random streams.
//!
//! Every consumer derives its generator from `(seed, stream)` so results do not
//! depend on scheduling or on how many draws other consumers made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers for the different consumers.
pub mod streams {
    pub const SOLVER_JITTER: u64 = 1;
    pub const CALIBRATION: u64 = 2;
    pub const OUTCOMES: u64 = 3;
}

/// Generator for one `(seed, stream, index)` triple.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    rng
}
