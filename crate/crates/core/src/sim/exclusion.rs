//! Exclusion dynamics with jumps onto occupied sites suppressed.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::Exp1;

use super::{check_times, SimError, StepSampler, WINDOW_CAP};
use crate::profile::Configuration;
use crate::walk::JumpKernel;

const NONE: u32 = u32::MAX;

/// Exclusion state indexed by site, with one list of active pairs per
/// jump length.
///
/// A pair {x, x+j} is active when exactly one end is occupied; it fires at
/// rate p_j and the particle crosses to the vacant end. This is the
/// exclusion generator written over pairs, so no proposal is ever wasted on
/// an occupied target.
///
/// Invariants: every particle lies in `[base, base + len − R)`; without a
/// reservoir every particle also lies at or above `base + R`; with a
/// reservoir every site below `base + R` is occupied.
struct PairEngine {
    base: i64,
    occ: Vec<bool>,
    filled_left: bool,
    radius: usize,
    jumps: Vec<i64>,
    rates: Vec<f64>,
    lists: Vec<Vec<i64>>,
    /// `pos[(x − base) * jumps.len() + q]` is the index of pair (x, x + jumps[q]).
    pos: Vec<u32>,
}

impl PairEngine {
    fn new(config: &Configuration, kernel: &JumpKernel) -> Result<Self, SimError> {
        let (jumps, rates): (Vec<i64>, Vec<f64>) = kernel.one_sided().unzip();
        let radius = kernel.max_offset() as usize;
        let sites = config.occupied();
        let lo = sites.first().copied().unwrap_or(config.left_boundary()).min(config.left_boundary());
        let hi = sites.last().copied().unwrap_or(lo);
        let margin = 2 * radius as i64 + 16;
        let base = if config.filled_left() { config.left_boundary() } else { lo - margin };
        let len = (hi + margin + 1 - base) as usize;
        if len > WINDOW_CAP {
            return Err(SimError::WindowOverflow { cap: WINDOW_CAP });
        }
        let mut occ = vec![false; len];
        for &s in sites {
            if s >= base {
                occ[(s - base) as usize] = true;
            }
        }
        let mut engine = Self {
            base,
            occ,
            filled_left: config.filled_left(),
            radius,
            lists: vec![Vec::new(); jumps.len()],
            pos: vec![NONE; len * jumps.len()],
            jumps,
            rates,
        };
        if engine.filled_left {
            while engine.vacancy_near_left() {
                engine.grow_left(64)?;
            }
        }
        for x in engine.base..engine.base + engine.occ.len() as i64 {
            for q in 0..engine.jumps.len() {
                engine.update(x, q);
            }
        }
        Ok(engine)
    }

    #[inline]
    fn occupied(&self, x: i64) -> bool {
        let i = x - self.base;
        if i < 0 {
            self.filled_left
        } else {
            self.occ.get(i as usize).copied().unwrap_or(false)
        }
    }

    fn vacancy_near_left(&self) -> bool {
        self.occ[..self.radius.min(self.occ.len())].iter().any(|&o| !o)
    }

    fn total_rate(&self) -> f64 {
        self.lists.iter().zip(&self.rates).map(|(l, &p)| l.len() as f64 * p).sum()
    }

    /// Brings the active status of pair (x, x + jumps[q]) up to date.
    #[inline]
    fn update(&mut self, x: i64, q: usize) {
        let i = x - self.base;
        let j = self.jumps[q];
        if i < 0 || (i + j) as usize >= self.occ.len() {
            return;
        }
        let active = self.occ[i as usize] != self.occ[(i + j) as usize];
        let slot = i as usize * self.jumps.len() + q;
        let idx = self.pos[slot];
        if active && idx == NONE {
            self.pos[slot] = self.lists[q].len() as u32;
            self.lists[q].push(x);
        } else if !active && idx != NONE {
            let list = &mut self.lists[q];
            let last = *list.last().expect("nonempty");
            list.swap_remove(idx as usize);
            if last != x {
                let moved = (last - self.base) as usize * self.jumps.len() + q;
                self.pos[moved] = idx;
            }
            self.pos[slot] = NONE;
        }
    }

    fn grow_left(&mut self, extra: usize) -> Result<(), SimError> {
        let extra = extra.max(self.occ.len() / 2).max(2 * self.radius);
        self.rebuild(extra, 0)
    }

    fn grow_right(&mut self) -> Result<(), SimError> {
        let extra = (self.occ.len() / 2).max(64).max(2 * self.radius);
        self.rebuild(0, extra)
    }

    fn rebuild(&mut self, left: usize, right: usize) -> Result<(), SimError> {
        let len = self.occ.len() + left + right;
        if len > WINDOW_CAP {
            return Err(SimError::WindowOverflow { cap: WINDOW_CAP });
        }
        let mut occ = vec![false; len];
        occ[..left].fill(self.filled_left);
        occ[left..left + self.occ.len()].copy_from_slice(&self.occ);
        self.occ = occ;
        self.base -= left as i64;
        let nq = self.jumps.len();
        self.pos = vec![NONE; len * nq];
        for (q, list) in self.lists.iter().enumerate() {
            for (k, &x) in list.iter().enumerate() {
                self.pos[(x - self.base) as usize * nq + q] = k as u32;
            }
        }
        Ok(())
    }

    /// Moves the particle at `from` to the vacant site `to`.
    fn apply(&mut self, from: i64, to: i64) -> Result<(), SimError> {
        self.occ[(from - self.base) as usize] = false;
        self.occ[(to - self.base) as usize] = true;
        let r = self.radius as i64;
        if to >= self.base + self.occ.len() as i64 - r {
            self.grow_right()?;
        }
        if self.filled_left {
            if from < self.base + r {
                self.grow_left(64)?;
            }
        } else if to < self.base + r {
            self.grow_left(64)?;
        }
        for q in 0..self.jumps.len() {
            let j = self.jumps[q];
            self.update(from - j, q);
            self.update(from, q);
            self.update(to - j, q);
            self.update(to, q);
        }
        Ok(())
    }

    /// Runs until `t_end`; returns the number of moves.
    fn run<R: Rng + ?Sized>(&mut self, mut time: f64, t_end: f64, rng: &mut R) -> Result<u64, SimError> {
        let mut moves = 0u64;
        let single = self.jumps.len() == 1;
        loop {
            let total = self.total_rate();
            if total <= 0.0 {
                break;
            }
            let e: f64 = rng.sample(Exp1);
            time += e / total;
            if time > t_end {
                break;
            }
            let q = if single {
                0
            } else {
                let mut u = rng.random::<f64>() * total;
                let mut q = 0;
                while q + 1 < self.jumps.len() {
                    u -= self.lists[q].len() as f64 * self.rates[q];
                    if u < 0.0 {
                        break;
                    }
                    q += 1;
                }
                // Round-off can land on an empty class; fall back to the last nonempty one.
                while self.lists[q].is_empty() {
                    q -= 1;
                }
                q
            };
            let list = &self.lists[q];
            let x = list[rng.random_range(0..list.len())];
            let y = x + self.jumps[q];
            if self.occupied(x) {
                self.apply(x, y)?;
            } else {
                self.apply(y, x)?;
            }
            moves += 1;
        }
        Ok(moves)
    }

    fn into_configuration(self, time: f64) -> Configuration {
        let sites = self
            .occ
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| self.base + i as i64)
            .collect();
        Configuration::from_parts(sites, time, self.base, self.filled_left)
    }
}

/// Exclusion dynamics up to `t_end`.
pub fn evolve_suppressed<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &JumpKernel,
    t_end: f64,
    rng: &mut R,
) -> Result<Configuration, SimError> {
    evolve_suppressed_counted(config, kernel, t_end, rng).map(|(c, _)| c)
}

/// [`evolve_suppressed`] that also reports the number of moves.
pub fn evolve_suppressed_counted<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &JumpKernel,
    t_end: f64,
    rng: &mut R,
) -> Result<(Configuration, u64), SimError> {
    check_times(config, t_end)?;
    if t_end == config.time {
        return Ok((config.clone(), 0));
    }
    let mut engine = PairEngine::new(config, kernel)?;
    let moves = engine.run(config.time, t_end, rng)?;
    Ok((engine.into_configuration(t_end), moves))
}

/// Exclusion dynamics by per-particle thinning.
///
/// Every particle carries a rate-1 clock; on a ring it draws a displacement
/// from the kernel and moves only if the target is vacant. Returns the
/// configuration and the number of clock rings. Much slower than
/// [`evolve_suppressed`]; kept as an independent implementation.
pub fn evolve_suppressed_naive<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &JumpKernel,
    t_end: f64,
    rng: &mut R,
) -> Result<(Configuration, u64), SimError> {
    check_times(config, t_end)?;
    if config.filled_left() {
        return Err(SimError::InfiniteConfiguration);
    }
    let sampler = StepSampler::new(kernel);
    let mut positions: Vec<i64> = config.occupied().to_vec();
    let mut taken: HashSet<i64> = positions.iter().copied().collect();
    let n = positions.len();
    let mut time = config.time;
    let mut rings = 0u64;
    if n > 0 {
        loop {
            let e: f64 = rng.sample(Exp1);
            time += e / n as f64;
            if time > t_end {
                break;
            }
            rings += 1;
            let i = rng.random_range(0..n);
            let target = positions[i] + sampler.sample(rng);
            if !taken.contains(&target) {
                taken.remove(&positions[i]);
                taken.insert(target);
                positions[i] = target;
            }
        }
    }
    positions.sort_unstable();
    let left = config.left_boundary().min(positions.first().copied().unwrap_or(0));
    Ok((Configuration::from_parts(positions, t_end, left, false), rings))
}
