//! Seeded random streams.
//!
//! Every trajectory owns one ChaCha8 stream. A stream is identified by the
//! master seed plus a 64-bit stream id, so any trajectory of any epoch can be
//! regenerated without replaying the others. Normal deviates use the
//! ziggurat transform from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Source of the two kinds of randomness the simulator consumes.
pub trait NoiseSource {
    /// Uniform deviate on `[0, 1)`.
    fn uniform(&mut self) -> f64;
    /// Standard normal deviate.
    fn standard_normal(&mut self) -> f64;
}

/// What a stream is used for. Occupies the top byte of the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamPurpose {
    PolicyInit = 1,
    Training = 2,
    Evaluation = 3,
    Thermalize = 4,
    Test = 0xff,
}

/// Identifies one random stream: `(seed, stream_id)` pairs are unique per
/// trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseConfig {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        NoiseConfig { seed, stream_id }
    }

    /// Stream id layout: `purpose << 56 | epoch << 24 | index`.
    pub fn for_trajectory(seed: u64, purpose: StreamPurpose, epoch: u64, index: u64) -> Self {
        debug_assert!(epoch < 1 << 32, "epoch exceeds stream id field");
        debug_assert!(index < 1 << 24, "trajectory index exceeds stream id field");
        let stream_id = ((purpose as u64) << 56) | ((epoch & 0xffff_ffff) << 24) | (index & 0xff_ffff);
        NoiseConfig { seed, stream_id }
    }

    pub fn rng(&self) -> TrajectoryRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        TrajectoryRng { inner }
    }
}

/// ChaCha8 stream for one trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryRng {
    inner: ChaCha8Rng,
}

impl TrajectoryRng {
    /// Position in the keystream, in 32-bit words. Together with the
    /// [`NoiseConfig`] this fully determines the generator state.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn set_word_pos(&mut self, pos: u128) {
        self.inner.set_word_pos(pos);
    }
}

impl NoiseSource for TrajectoryRng {
    #[inline]
    fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

/// Deterministic stub: every normal deviate is zero and every uniform
/// deviate is the fixed value `uniform`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroNoise {
    pub uniform: f64,
}

impl Default for ZeroNoise {
    fn default() -> Self {
        ZeroNoise { uniform: 0.5 }
    }
}

impl NoiseSource for ZeroNoise {
    fn uniform(&mut self) -> f64 {
        self.uniform
    }

    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

impl<T: NoiseSource + ?Sized> NoiseSource for &mut T {
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }

    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }
}
