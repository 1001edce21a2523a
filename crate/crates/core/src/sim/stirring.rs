//! Stirring: site pairs {x, x+j} exchange their contents at rate p_j.
//!
//! Each particle carries a rate-1 clock and draws a displacement j. A
//! vacant target receives the particle; an occupied target swaps the two
//! labels with probability 1/2, because that pair is also served by the
//! other particle's clock. The occupation process is exclusion and each
//! label performs the free walk.

use rand::Rng;
use rand_distr::Exp1;

use super::{check_times, SimError, StepSampler, WINDOW_CAP};
use crate::profile::Configuration;
use crate::walk::JumpKernel;

const EMPTY: u32 = u32::MAX;

/// Final configuration together with the labeled walkers.
#[derive(Clone, Debug, PartialEq)]
pub struct StirringOutcome {
    pub config: Configuration,
    /// `(ξ_i(0), ξ_i(t))` per initial particle, in initial order.
    pub labels: Vec<(i64, i64)>,
    /// Clock rings.
    pub events: u64,
}

impl StirringOutcome {
    /// Σ_i 1{ξ_i(t) > z} over the labeled walkers.
    pub fn labeled_count_above(&self, z: f64) -> u64 {
        self.labels.iter().filter(|&&(_, x)| x as f64 > z).count() as u64
    }
}

struct LabelWindow {
    base: i64,
    label: Vec<u32>,
}

impl LabelWindow {
    fn slot(&mut self, x: i64) -> Result<&mut u32, SimError> {
        if x < self.base || x >= self.base + self.label.len() as i64 {
            self.extend_to(x)?;
        }
        Ok(&mut self.label[(x - self.base) as usize])
    }

    fn extend_to(&mut self, x: i64) -> Result<(), SimError> {
        let grow = (self.label.len() / 2).max(64);
        let (left, right) = if x < self.base {
            ((self.base - x) as usize + grow, 0)
        } else {
            (0, (x - self.base) as usize + 1 - self.label.len() + grow)
        };
        let len = self.label.len() + left + right;
        if len > WINDOW_CAP {
            return Err(SimError::WindowOverflow { cap: WINDOW_CAP });
        }
        let mut label = vec![EMPTY; len];
        label[left..left + self.label.len()].copy_from_slice(&self.label);
        self.label = label;
        self.base -= left as i64;
        Ok(())
    }
}

/// Stirring dynamics up to `t_end`.
pub fn evolve_stirring<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &JumpKernel,
    t_end: f64,
    rng: &mut R,
) -> Result<StirringOutcome, SimError> {
    check_times(config, t_end)?;
    if config.filled_left() {
        return Err(SimError::InfiniteConfiguration);
    }
    let start: Vec<i64> = config.occupied().to_vec();
    let mut pos = start.clone();
    let n = pos.len();
    let lo = start.first().copied().unwrap_or(0);
    let hi = start.last().copied().unwrap_or(0);
    let margin = 4 * kernel.max_offset() + 64;
    let mut window = LabelWindow {
        base: lo - margin,
        label: vec![EMPTY; (hi - lo + 2 * margin + 1) as usize],
    };
    for (i, &x) in pos.iter().enumerate() {
        *window.slot(x)? = i as u32;
    }
    let sampler = StepSampler::new(kernel);
    let mut time = config.time;
    let mut events = 0u64;
    if n > 0 {
        loop {
            let e: f64 = rng.sample(Exp1);
            time += e / n as f64;
            if time > t_end {
                break;
            }
            events += 1;
            let i = rng.random_range(0..n);
            let x = pos[i];
            let y = x + sampler.sample(rng);
            let other = *window.slot(y)?;
            if other == EMPTY {
                *window.slot(y)? = i as u32;
                *window.slot(x)? = EMPTY;
                pos[i] = y;
            } else if rng.random::<bool>() {
                *window.slot(y)? = i as u32;
                *window.slot(x)? = other;
                pos[i] = y;
                pos[other as usize] = x;
            }
        }
    }
    let mut sites = pos.clone();
    sites.sort_unstable();
    let left = config.left_boundary().min(sites.first().copied().unwrap_or(0));
    Ok(StirringOutcome {
        config: Configuration::from_parts(sites, t_end, left, false),
        labels: start.into_iter().zip(pos).collect(),
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, subsystem};

    #[test]
    fn labels_track_occupation() {
        let k = JumpKernel::new(&[(1, 0.3), (2, 0.2)], 1.0).unwrap();
        let c = Configuration::new(vec![-4, -3, -1, 0], 0.0, -4).unwrap();
        for r in 0..20 {
            let mut rng = stream(9, r, subsystem::DYNAMICS);
            let out = evolve_stirring(&c, &k, 25.0, &mut rng).unwrap();
            let mut finals: Vec<i64> = out.labels.iter().map(|l| l.1).collect();
            finals.sort_unstable();
            assert_eq!(finals, out.config.occupied());
            for z in [-2.5, 0.0, 3.0] {
                assert_eq!(out.labeled_count_above(z), out.config.count_above(z));
            }
        }
    }
}
