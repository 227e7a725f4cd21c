//! Seeded randomness for experiments and randomized checks.
//!
//! Every random draw goes through SplitMix64 and the explicit 53-bit mapping
//! below, so a run can be reproduced outside this crate from the seed alone.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lower: f64, upper: f64) -> f64 {
        lower + (upper - lower) * self.unit()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.unit() * n as f64) as usize % n
    }

    pub fn uniform_vec(&mut self, len: usize, lower: f64, upper: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(lower, upper)).collect()
    }

    /// Derive an independent stream, e.g. one per experiment item.
    pub fn fork(&mut self) -> Self {
        Self::new(self.next_u64())
    }
}
