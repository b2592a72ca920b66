//! Reproducible random streams.
//!
//! Every sampler takes an [`RngStream`], a `(seed, stream)` pair that is
//! expanded into a ChaCha8 generator with the stream id placed in ChaCha's
//! 64-bit stream word. Distinct stream ids give non-overlapping sequences for
//! the same seed, so replica `k` of an experiment simply uses stream `k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name of the generator algorithm, recorded in report metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 + set_stream";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Sub-stream for replica `index` of a named block.
    ///
    /// Blocks keep replicas of different experiments that share a seed apart:
    /// the high 24 bits carry the block, the low 40 the replica index.
    pub fn substream(&self, block: u64, index: u64) -> Self {
        let stream = self.stream.wrapping_add(block << 40).wrapping_add(index & ((1u64 << 40) - 1));
        Self { seed: self.seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
