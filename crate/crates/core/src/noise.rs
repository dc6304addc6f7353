//! Seeded noise sources.
//!
//! Streams are ChaCha8 generators keyed by a master seed; independent chains
//! take distinct stream ids via [`RngStream::stream`], so chain `k` of a run
//! with seed `s` always sees the same sequence regardless of scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    /// Stream `index` of master seed `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { seed, stream: index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream
    }

    pub fn std_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in 0..n.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Standard normal conditioned on `value >= lower`.
    ///
    /// Plain rejection for `lower <= 0`; Robert's exponential proposal above.
    pub fn truncated_normal(&mut self, lower: f64) -> f64 {
        if lower == f64::NEG_INFINITY {
            return self.std_normal();
        }
        if lower <= 0.0 {
            loop {
                let x = self.std_normal();
                if x >= lower {
                    return x;
                }
            }
        }
        let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
        loop {
            let e: f64 = self.rng.sample(Exp1);
            let z = lower + e / rate;
            let d = z - rate;
            if self.uniform() <= (-0.5 * d * d).exp() {
                return z;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    rng.std_normal()
}

pub fn sample_truncated_normal(rng: &mut RngStream, lower: f64) -> f64 {
    rng.truncated_normal(lower)
}

pub fn sample_uniform(rng: &mut RngStream) -> f64 {
    rng.uniform()
}

/// Noise truncation η ≥ 1/√ε + α. `alpha = -inf` means no truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub alpha: f64,
    pub epsilon: f64,
}

impl TruncationSpec {
    pub fn none(epsilon: f64) -> Self {
        Self { alpha: f64::NEG_INFINITY, epsilon }
    }

    /// Lower bound of the truncated noise.
    pub fn lower(&self) -> f64 {
        1.0 / self.epsilon.sqrt() + self.alpha
    }

    pub fn is_truncated(&self) -> bool {
        self.alpha.is_finite()
    }
}
