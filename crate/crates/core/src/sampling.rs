//! Seeded random draws.
//!
//! Every stream is a ChaCha8 generator seeded from a `u64`, so a seed fixes
//! the full sequence of draws on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::domain::PointInternal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
}

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self, mean: f64, variance: f64) -> Result<f64, SamplingError> {
        if variance.is_nan() || variance < 0.0 {
            return Err(SamplingError::NegativeVariance(variance));
        }
        if variance == 0.0 {
            return Ok(mean);
        }
        let z: f64 = self.rng.sample(StandardNormal);
        Ok(mean + variance.sqrt() * z)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

pub fn draw_normal(rng: &mut RngState, mean: f64, variance: f64) -> Result<f64, SamplingError> {
    rng.normal(mean, variance)
}

/// Plain Latin hypercube design of `n` points in `[0,1]^dim`.
///
/// Each dimension gets its own random permutation of the `n` strata, and
/// each point is uniform inside its stratum.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut RngState) -> Vec<PointInternal> {
    let mut points = vec![vec![0.0; dim]; n];
    let nf = n as f64;
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        rng.shuffle(&mut strata);
        for (point, &k) in points.iter_mut().zip(&strata) {
            let c = (k as f64 + rng.uniform()) / nf;
            // rounding can land exactly on the next stratum's edge
            point[d] = if c * nf >= (k + 1) as f64 {
                k as f64 / nf
            } else {
                c
            };
        }
    }
    points.into_iter().map(PointInternal).collect()
}

/// Uniform point in `[0,1]^dim`.
pub fn uniform_point(dim: usize, rng: &mut RngState) -> PointInternal {
    PointInternal((0..dim).map(|_| rng.uniform()).collect())
}
