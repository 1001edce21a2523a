//! Independent walks with no interaction.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use super::{check_times, SimError, StepSampler};
use crate::profile::Configuration;
use crate::walk::JumpKernel;

/// Positions of independent walkers; repeats are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeParticles {
    /// Sorted, possibly with repeats.
    pub positions: Vec<i64>,
    pub time: f64,
    /// Total number of jumps taken.
    pub jumps: u64,
}

impl FreeParticles {
    pub fn max(&self) -> Option<i64> {
        self.positions.last().copied()
    }

    pub fn count_above(&self, z: f64) -> u64 {
        (self.positions.len() - self.positions.partition_point(|&s| s as f64 <= z)) as u64
    }
}

/// Each particle takes Poisson(t_end − time) independent kernel steps.
pub fn evolve_free<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &JumpKernel,
    t_end: f64,
    rng: &mut R,
) -> Result<FreeParticles, SimError> {
    check_times(config, t_end)?;
    if config.filled_left() {
        return Err(SimError::InfiniteConfiguration);
    }
    let dt = t_end - config.time;
    let sampler = StepSampler::new(kernel);
    let mut jumps = 0u64;
    let mut positions: Vec<i64> = Vec::with_capacity(config.len());
    let count = (dt > 0.0).then(|| Poisson::new(dt).expect("positive rate"));
    for &x in config.occupied() {
        let n = count.as_ref().map_or(0, |d| d.sample(rng) as u64);
        jumps += n;
        let shift = if kernel.is_nearest_neighbor() {
            let right = if n == 0 { 0 } else { Binomial::new(n, 0.5).expect("valid").sample(rng) };
            2 * right as i64 - n as i64
        } else {
            (0..n).map(|_| sampler.sample(rng)).sum()
        };
        positions.push(x + shift);
    }
    positions.sort_unstable();
    Ok(FreeParticles {
        positions,
        time: t_end,
        jumps,
    })
}
