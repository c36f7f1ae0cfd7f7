//! Seeded generators and the fixed sub-stream layout used by the pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`. Different streams of the same
/// seed never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sub-streams of one replication's seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Covariates = 1,
    Coefficients = 2,
    Noise = 3,
    Knockoffs = 4,
    NetworkInit = 5,
    Training = 6,
}

impl Stream {
    pub fn rng(self, seed: u64) -> SeededRng {
        stream_rng(seed, self as u64)
    }
}
