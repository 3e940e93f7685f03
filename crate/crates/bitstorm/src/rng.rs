//! Deterministic, splittable randomness.
//!
//! Every stochastic operation in the crate draws from a [`RandomSource`]
//! identified by a `(seed, stream_id)` pair. The same pair always yields the
//! same draw sequence, and distinct stream ids yield streams that are
//! independent for testing purposes. Work is parallelized by pre-splitting
//! streams (per trial, member, layer), never by sharing a generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One deterministic random stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream derived from this one's identity and a tag. Derivation
    /// depends only on `(seed, stream_id, tag)`, not on draws already made.
    pub fn substream(&self, tag: u64) -> RandomSource {
        RandomSource::new(self.seed, mix(self.stream_id, tag))
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Single fair bit.
    pub fn fair_bit(&mut self) -> bool {
        self.rng.random::<bool>()
    }

    /// Raw 64-bit draw (used to seed hardware-side generators).
    pub fn raw_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Bernoulli draw with probability `p` of `true`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// splitmix64 finalizer; combines a stream id with a tag.
fn mix(id: u64, tag: u64) -> u64 {
    let mut z = id ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
