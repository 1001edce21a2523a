//! Event-driven simulation of symmetric exclusion and of free walks.
//!
//! Three couplings are available. `Suppressed` runs the exclusion
//! generator directly, `Stirring` exchanges site contents and keeps track
//! of labeled walkers, and `Free` lets every particle walk independently.
//! [`RunSpec::run`] draws independent replicates in parallel; the output
//! depends only on the seed and parameters, never on scheduling.

mod exclusion;
mod free;
mod stirring;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{self, Configuration, ProfileError, StepProfile};
use crate::rng::{stream, subsystem};
use crate::theory::ScalingPair;
use crate::walk::JumpKernel;

pub use exclusion::{evolve_suppressed, evolve_suppressed_counted, evolve_suppressed_naive};
pub use free::{evolve_free, FreeParticles};
pub use stirring::{evolve_stirring, StirringOutcome};

/// Largest number of sites any engine window may span.
pub const WINDOW_CAP: usize = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("replicate count must be at least 1")]
    EmptyRun,
    #[error("tracked window would exceed {cap} sites")]
    WindowOverflow { cap: usize },
    #[error("end time {t_end} is before the configuration time {time}")]
    EndBeforeStart { time: f64, t_end: f64 },
    #[error("no threshold to certify a left cut; pass thresholds or an explicit cut")]
    NoCutThreshold,
    #[error("this coupling needs a finite configuration")]
    InfiniteConfiguration,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Suppressed,
    Stirring,
    Free,
}

impl std::str::FromStr for Coupling {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "suppressed" => Ok(Self::Suppressed),
            "stirring" => Ok(Self::Stirring),
            "free" => Ok(Self::Free),
            other => Err(format!("unknown coupling `{other}`")),
        }
    }
}

/// Occupation of every site in a window `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSnapshot {
    pub lo: i64,
    pub hi: i64,
    pub t: f64,
    bits: Vec<u64>,
}

impl SiteSnapshot {
    pub fn from_sites(lo: i64, hi: i64, t: f64, occupied: impl IntoIterator<Item = i64>) -> Self {
        let width = (hi - lo + 1).max(0) as usize;
        let mut bits = vec![0u64; width.div_ceil(64)];
        for s in occupied {
            if (lo..=hi).contains(&s) {
                let i = (s - lo) as usize;
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        Self { lo, hi, t, bits }
    }

    pub fn get(&self, x: i64) -> bool {
        if !(self.lo..=self.hi).contains(&x) {
            return false;
        }
        let i = (x - self.lo) as usize;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }
}

/// Extreme-value observables of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    pub replicate: u64,
    pub seed: u64,
    pub t: f64,
    /// Right-most particle X_t.
    pub x_t: i64,
    /// X_t^(0), X_t^(1), …; strictly decreasing under exclusion.
    pub order_stats: Vec<i64>,
    /// `(z, N_t(z))` for every recorded threshold.
    pub n_t: Vec<(f64, u64)>,
    /// Engine events (moves, swaps or clock rings depending on the coupling).
    pub events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SiteSnapshot>,
}

impl ObservableSample {
    pub fn count(&self, z: f64) -> Option<u64> {
        self.n_t.iter().find(|(w, _)| *w == z).map(|&(_, n)| n)
    }

    /// N_t(z) agrees with the recorded order statistics.
    pub fn is_consistent(&self) -> bool {
        let depth = self.order_stats.len() as u64;
        self.n_t.iter().all(|&(z, n)| {
            let above = self.order_stats.iter().filter(|&&x| x as f64 > z).count() as u64;
            above == n.min(depth)
        }) && self.order_stats.first() == Some(&self.x_t)
    }
}

/// X_t/(σ·b_t) − a_t.
pub fn scaled_position(x_t: i64, scaling: &ScalingPair, sigma: f64) -> f64 {
    x_t as f64 / (sigma * scaling.b) - scaling.a
}

/// Draws one displacement from a jump kernel.
#[derive(Clone, Debug)]
pub struct StepSampler {
    steps: Vec<i64>,
    alias: Option<WeightedAliasIndex<f64>>,
}

impl StepSampler {
    pub fn new(kernel: &JumpKernel) -> Self {
        if kernel.is_nearest_neighbor() {
            return Self {
                steps: vec![-1, 1],
                alias: None,
            };
        }
        let support = kernel.signed_support();
        let steps = support.iter().map(|&(j, _)| j).collect();
        let weights = support.iter().map(|&(_, p)| p).collect();
        Self {
            steps,
            alias: Some(WeightedAliasIndex::new(weights).expect("kernel weights are valid")),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match &self.alias {
            None => {
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
            Some(alias) => self.steps[alias.sample(rng)],
        }
    }
}

/// Replicate experiment description.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub profile: StepProfile,
    pub kernel: JumpKernel,
    pub t: f64,
    pub z_list: Vec<f64>,
    pub m_max: usize,
    pub n: usize,
    pub base_seed: u64,
    pub coupling: Coupling,
    /// Explicit left cut; otherwise one is certified from `cut_z` or the
    /// smallest threshold in `z_list`.
    pub cut: Option<i64>,
    pub cut_z: Option<f64>,
    pub cut_eps: f64,
    /// Represent the full step by an implicit filled half-line instead of
    /// truncating it (suppressed coupling only).
    pub exact_full_step: bool,
    pub snapshot: Option<(i64, i64)>,
}

/// Default depth of recorded order statistics.
pub const DEFAULT_M_MAX: usize = 3;
/// Default total-variation budget for the left cut.
pub const DEFAULT_CUT_EPS: f64 = 1e-6;

impl RunSpec {
    pub fn new(profile: StepProfile, kernel: JumpKernel, t: f64, coupling: Coupling) -> Self {
        Self {
            profile,
            kernel,
            t,
            z_list: Vec::new(),
            m_max: DEFAULT_M_MAX,
            n: 1,
            base_seed: 0,
            coupling,
            cut: None,
            cut_z: None,
            cut_eps: DEFAULT_CUT_EPS,
            exact_full_step: true,
            snapshot: None,
        }
    }

    fn uses_reservoir(&self) -> bool {
        self.exact_full_step && self.coupling == Coupling::Suppressed && self.profile.is_full_step()
    }

    /// The left cut used for every replicate, or `None` when the full step
    /// is represented exactly.
    pub fn resolve_cut(&self) -> Result<Option<i64>, SimError> {
        if self.uses_reservoir() {
            return Ok(None);
        }
        if let Some(c) = self.cut {
            return Ok(Some(c.min(0)));
        }
        let z = self
            .cut_z
            .or_else(|| self.z_list.iter().cloned().reduce(f64::min));
        match (z, self.profile.leftmost()) {
            (Some(z), _) => Ok(Some(profile::left_cut(&self.profile, &self.kernel, self.t, z, self.cut_eps)?)),
            (None, Some(l)) => Ok(Some(l)),
            (None, None) => Err(SimError::NoCutThreshold),
        }
    }

    /// All replicates, in replicate order.
    pub fn run(&self) -> Result<Vec<ObservableSample>, SimError> {
        if self.n == 0 {
            return Err(SimError::EmptyRun);
        }
        let cut = self.resolve_cut()?;
        (0..self.n as u64)
            .into_par_iter()
            .map(|r| self.replicate(r, cut))
            .collect()
    }

    pub fn replicate(&self, replicate: u64, cut: Option<i64>) -> Result<ObservableSample, SimError> {
        let initial = match cut {
            None => Configuration::full_step(),
            Some(c) => {
                let mut rng = stream(self.base_seed, replicate, subsystem::INITIAL);
                profile::sample_initial(&self.profile, c, &mut rng)
            }
        };
        let mut rng = stream(self.base_seed, replicate, subsystem::DYNAMICS);
        let (sites, events): (Vec<i64>, u64) = match self.coupling {
            Coupling::Suppressed => {
                let (c, ev) = evolve_suppressed_counted(&initial, &self.kernel, self.t, &mut rng)?;
                return Ok(self.observe(replicate, &c, ev));
            }
            Coupling::Stirring => {
                let out = evolve_stirring(&initial, &self.kernel, self.t, &mut rng)?;
                (out.config.occupied().to_vec(), out.events)
            }
            Coupling::Free => {
                let out = evolve_free(&initial, &self.kernel, self.t, &mut rng)?;
                (out.positions, out.jumps)
            }
        };
        Ok(self.observe_sites(replicate, &sites, events))
    }

    fn observe(&self, replicate: u64, config: &Configuration, events: u64) -> ObservableSample {
        let order_stats = config.order_stats(self.m_max);
        let n_t = self.z_list.iter().map(|&z| (z, config.count_above(z))).collect();
        let snapshot = self.snapshot.map(|(lo, hi)| {
            let below = if config.filled_left() { lo..config.left_boundary().min(hi + 1) } else { 0..0 };
            SiteSnapshot::from_sites(lo, hi, self.t, below.chain(config.occupied().iter().copied()))
        });
        ObservableSample {
            replicate,
            seed: self.base_seed,
            t: self.t,
            x_t: order_stats.first().copied().unwrap_or(i64::MIN),
            order_stats,
            n_t,
            events,
            snapshot,
        }
    }

    /// Observables of a sorted (possibly repeated) list of positions.
    fn observe_sites(&self, replicate: u64, sites: &[i64], events: u64) -> ObservableSample {
        let order_stats: Vec<i64> = sites.iter().rev().take(self.m_max + 1).copied().collect();
        let n_t = self
            .z_list
            .iter()
            .map(|&z| (z, (sites.len() - sites.partition_point(|&s| s as f64 <= z)) as u64))
            .collect();
        let snapshot = self
            .snapshot
            .map(|(lo, hi)| SiteSnapshot::from_sites(lo, hi, self.t, sites.iter().copied()));
        ObservableSample {
            replicate,
            seed: self.base_seed,
            t: self.t,
            x_t: order_stats.first().copied().unwrap_or(i64::MIN),
            order_stats,
            n_t,
            events,
            snapshot,
        }
    }
}

/// Replicates for the given parameters with default cut handling.
#[allow(clippy::too_many_arguments)]
pub fn run_replicates(
    profile: &StepProfile,
    kernel: &JumpKernel,
    t: f64,
    z_list: &[f64],
    m_max: usize,
    n: usize,
    base_seed: u64,
    coupling: Coupling,
) -> Result<Vec<ObservableSample>, SimError> {
    let mut spec = RunSpec::new(profile.clone(), kernel.clone(), t, coupling);
    spec.z_list = z_list.to_vec();
    spec.m_max = m_max;
    spec.n = n;
    spec.base_seed = base_seed;
    spec.run()
}

fn check_times(config: &Configuration, t_end: f64) -> Result<(), SimError> {
    if t_end < config.time || t_end.is_nan() {
        return Err(SimError::EndBeforeStart {
            time: config.time,
            t_end,
        });
    }
    Ok(())
}
