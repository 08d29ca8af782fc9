//! Seedable, splittable random streams.
//!
//! Every stream is a ChaCha20 generator (`rand_chacha`). A run owns one
//! master seed; independent children are obtained by selecting a distinct
//! ChaCha stream number for the same key, so the subsample, Hessian-sample,
//! sketch and iterate-pick draws never share state. Integer draws go through
//! `u64` ranges so results do not depend on the platform's `usize` width.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Purpose tags for the child streams of one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    GradientSample,
    HessianSample,
    Sketch,
    IteratePick,
    /// Free-form stream for callers outside the optimizer (data generation, tests).
    Custom(u32),
}

impl StreamId {
    fn number(self) -> u64 {
        match self {
            StreamId::GradientSample => 1,
            StreamId::HessianSample => 2,
            StreamId::Sketch => 3,
            StreamId::IteratePick => 4,
            StreamId::Custom(k) => 0x1_0000_0000 + u64::from(k),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// A fresh stream sharing this stream's key but on a disjoint ChaCha stream.
    pub fn child(&self, id: StreamId) -> RandomStream {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(id.number());
        RandomStream { seed: self.seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform integer in `[lo, hi)`.
    pub fn uniform_index(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo < hi);
        self.rng.random_range(lo as u64..hi as u64) as usize
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RandomStream {
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
