//! Nearest-neighbor ASEP with drift into the step, through its zero-range
//! picture.
//!
//! Site x ≥ 1 holds the gap ζ(x) behind the x-th particle. A particle is
//! injected at site 1 at rate p; every occupied site sends one particle to
//! x+1 at rate p and to x−1 at rate q = 1 − p, and a particle leaving site
//! 1 to the left falls into the well. X_t = Σ_x ζ_t(x) is the
//! displacement of the tagged particle. For p < q the law of ζ_t converges
//! to the product of Geometric(1 − (p/q)^x) marginals.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conv;
use crate::rng::{stream, subsystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZrError {
    #[error("right rate p = {0} must lie in [0, 1/2)")]
    RateOutOfRange(f64),
    #[error("ratio r = {0} must lie in (0, 1)")]
    RatioOutOfRange(f64),
    #[error("tolerance {0} must lie in (0, 1)")]
    InvalidTolerance(f64),
    #[error("lower configuration exceeds upper at site {site} (t = {time})")]
    DominationViolated { site: usize, time: f64 },
    #[error("end time {t_end} is before the configuration time {time}")]
    EndBeforeStart { time: f64, t_end: f64 },
}

/// ASEP jump rates: p to the right, q = 1 − p to the left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsepParams {
    p: f64,
}

impl AsepParams {
    pub fn new(p: f64) -> Result<Self, ZrError> {
        if !(0.0..0.5).contains(&p) {
            return Err(ZrError::RateOutOfRange(p));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// r = p/q.
    pub fn ratio(&self) -> f64 {
        self.p / self.q()
    }
}

/// Finitely many occupied sites x ≥ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZrConfig {
    /// `occ[x − 1]` = ζ(x); no trailing zeros.
    occ: Vec<u64>,
    pub time: f64,
}

impl ZrConfig {
    pub fn empty() -> Self {
        Self {
            occ: Vec::new(),
            time: 0.0,
        }
    }

    /// From `(site, count)` pairs with site ≥ 1.
    pub fn from_pairs(pairs: &[(usize, u64)]) -> Self {
        let mut c = Self::empty();
        for &(x, k) in pairs {
            assert!(x >= 1, "zero-range sites start at 1");
            c.ensure(x);
            c.occ[x - 1] += k;
        }
        c.trim();
        c
    }

    pub fn get(&self, x: usize) -> u64 {
        if x == 0 {
            return 0;
        }
        self.occ.get(x - 1).copied().unwrap_or(0)
    }

    /// Largest site that may be occupied.
    pub fn extent(&self) -> usize {
        self.occ.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `(site, count)` for occupied sites.
    pub fn pairs(&self) -> Vec<(usize, u64)> {
        self.occ
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| (i + 1, k))
            .collect()
    }

    fn ensure(&mut self, x: usize) {
        if self.occ.len() < x {
            self.occ.resize(x, 0);
        }
    }

    fn trim(&mut self) {
        while self.occ.last() == Some(&0) {
            self.occ.pop();
        }
    }

    /// Sitewise ζ ≤ other; returns the first offending site.
    pub fn first_excess_over(&self, other: &ZrConfig) -> Option<usize> {
        (1..=self.extent()).find(|&x| self.get(x) > other.get(x))
    }
}

/// X = Σ_x ζ(x).
pub fn tagged_displacement(config: &ZrConfig) -> u64 {
    config.occ.iter().sum()
}

/// Occupied sites with O(1) insertion, removal and uniform choice.
struct SiteSet {
    members: Vec<usize>,
    index: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl SiteSet {
    fn from_config(c: &ZrConfig) -> Self {
        let mut s = Self {
            members: Vec::new(),
            index: vec![ABSENT; c.extent() + 2],
        };
        for (x, _) in c.pairs() {
            s.insert(x);
        }
        s
    }

    fn insert(&mut self, x: usize) {
        if self.index.len() <= x {
            self.index.resize(2 * x + 2, ABSENT);
        }
        if self.index[x] == ABSENT {
            self.index[x] = self.members.len() as u32;
            self.members.push(x);
        }
    }

    fn remove(&mut self, x: usize) {
        let i = self.index[x];
        if i != ABSENT {
            let last = *self.members.last().expect("nonempty");
            self.members.swap_remove(i as usize);
            if last != x {
                self.index[last] = i;
            }
            self.index[x] = ABSENT;
        }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.members[rng.random_range(0..self.members.len())]
    }
}

/// Moves one particle from x by ±1 (x = 1 to the left leaves the system).
fn shift(c: &mut ZrConfig, sites: &mut SiteSet, x: usize, right: bool) {
    c.occ[x - 1] -= 1;
    if c.occ[x - 1] == 0 {
        sites.remove(x);
    }
    if right {
        c.ensure(x + 1);
        c.occ[x] += 1;
        sites.insert(x + 1);
    } else if x > 1 {
        c.occ[x - 2] += 1;
        sites.insert(x - 1);
    }
}

fn inject(c: &mut ZrConfig, sites: &mut SiteSet) {
    c.ensure(1);
    c.occ[0] += 1;
    sites.insert(1);
}

fn check_end(c: &ZrConfig, t_end: f64) -> Result<(), ZrError> {
    if t_end < c.time() || t_end.is_nan() {
        return Err(ZrError::EndBeforeStart {
            time: c.time(),
            t_end,
        });
    }
    Ok(())
}

/// Zero-range dynamics up to `t_end`. Total event rate is p + #occupied sites.
pub fn evolve_zr<R: Rng + ?Sized>(
    config: &ZrConfig,
    params: &AsepParams,
    t_end: f64,
    rng: &mut R,
) -> Result<ZrConfig, ZrError> {
    check_end(config, t_end)?;
    let mut c = config.clone();
    let mut sites = SiteSet::from_config(&c);
    let p = params.p();
    let mut time = c.time();
    loop {
        let total = p + sites.members.len() as f64;
        if total <= 0.0 {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        time += e / total;
        if time > t_end {
            break;
        }
        let u = rng.random::<f64>() * total;
        if u < p {
            inject(&mut c, &mut sites);
        } else {
            let x = sites.pick(rng);
            let right = rng.random::<f64>() < p;
            shift(&mut c, &mut sites, x, right);
        }
    }
    c.trim();
    c.time = t_end;
    Ok(c)
}

/// Initial law for [`replicate_sums`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZrStart {
    Empty,
    /// A fresh draw from the product measure, cut at [`default_site_cut`].
    Stationary,
}

/// Σζ_t of `n` independent runs, in replicate order.
pub fn replicate_sums(
    start: ZrStart,
    params: &AsepParams,
    t: f64,
    n: usize,
    base_seed: u64,
) -> Result<Vec<u64>, ZrError> {
    (0..n as u64)
        .into_par_iter()
        .map(|rep| {
            let initial = match start {
                ZrStart::Empty => ZrConfig::empty(),
                ZrStart::Stationary => {
                    let r = params.ratio();
                    let mut rng = stream(base_seed, rep, subsystem::INITIAL);
                    sample_mu(r, default_site_cut(r), &mut rng)?
                }
            };
            let mut rng = stream(base_seed, rep, subsystem::DYNAMICS);
            Ok(tagged_displacement(&evolve_zr(&initial, params, t, &mut rng)?))
        })
        .collect()
}

/// Law of Σ_x ζ(x) under the geometric product measure, on {0, …, K}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSum {
    pub pmf: Vec<f64>,
    /// Certified bound on the mass missing from `pmf`.
    pub eps: f64,
    /// Number of sites convolved.
    pub x_max: usize,
}

impl MuSum {
    pub fn prob(&self, k: u64) -> f64 {
        self.pmf.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn cdf(&self, k: f64) -> f64 {
        if k < 0.0 {
            return 0.0;
        }
        let top = (k.floor() as usize).min(self.pmf.len().saturating_sub(1));
        self.pmf[..=top].iter().sum()
    }

    /// CSV with columns `k,prob,eps`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,prob,eps")?;
        for (k, p) in self.pmf.iter().enumerate() {
            writeln!(out, "{k},{p:.16e},{:.16e}", self.eps)?;
        }
        Ok(())
    }
}

/// Σ_{x>X} r^x/(1 − r^x), which bounds P(ζ(x) > 0 for some x > X).
fn tail_mean(r: f64, x: usize) -> f64 {
    let mut total = 0.0;
    let mut rx = r.powi(x as i32 + 1);
    while rx > 1e-300 {
        let term = rx / (1.0 - rx);
        total += term;
        if term < total * 1e-18 {
            break;
        }
        rx *= r;
    }
    total
}

/// Smallest X with Σ_{x>X} r^x/(1 − r^x) < eps.
pub fn site_cut(r: f64, eps: f64) -> usize {
    let mut x = 1;
    while tail_mean(r, x) >= eps {
        x += 1;
    }
    x
}

/// Default number of sites sampled from the product measure.
pub fn default_site_cut(r: f64) -> usize {
    site_cut(r, 1e-6)
}

pub fn mu_sum_distribution(r: f64, eps: f64) -> Result<MuSum, ZrError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(ZrError::RatioOutOfRange(r));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ZrError::InvalidTolerance(eps));
    }
    let x_max = site_cut(r, eps / 2.0);
    let per_site = eps / (4.0 * x_max as f64);
    let mut pmf = vec![1.0];
    let mut dropped = 0.0;
    for x in 1..=x_max {
        let rx = r.powi(x as i32);
        // P(ζ(x) ≥ k) = r^{xk}; keep k while that exceeds the per-site budget.
        let kmax = ((per_site.ln() / rx.ln()).ceil() as usize).max(1);
        let site: Vec<f64> = (0..kmax).map(|k| (1.0 - rx) * rx.powi(k as i32)).collect();
        dropped += rx.powi(kmax as i32);
        pmf = conv::convolve(&pmf, &site);
    }
    let mass: f64 = pmf.iter().sum();
    Ok(MuSum {
        pmf,
        eps: (eps / 2.0 + dropped + 1e-14).max(1.0 - mass),
        x_max,
    })
}

/// Independent Geometric(1 − r^x) occupation of sites 1..=x_max.
pub fn sample_mu<R: Rng + ?Sized>(r: f64, x_max: usize, rng: &mut R) -> Result<ZrConfig, ZrError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(ZrError::RatioOutOfRange(r));
    }
    let mut c = ZrConfig::empty();
    c.occ = (1..=x_max)
        .map(|x| {
            let success = 1.0 - r.powi(x as i32);
            if success >= 1.0 {
                0
            } else {
                Geometric::new(success).expect("valid probability").sample(rng)
            }
        })
        .collect();
    c.trim();
    Ok(c)
}

/// When the coupled evolution checks sitewise domination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominationCheck {
    AtEnd,
    EveryEvent,
}

/// Basic coupling of two zero-range processes with lower ≤ upper sitewise.
///
/// Both copies share the injection clock; at each site occupied in the
/// upper copy a rate-1 clock chooses a direction and every copy with a
/// particle there moves one in that direction. Since the jump rate
/// 1{k ≥ 1} is nondecreasing in k, domination is preserved.
pub fn coupled_evolve<R: Rng + ?Sized>(
    lower: &ZrConfig,
    upper: &ZrConfig,
    params: &AsepParams,
    t_end: f64,
    rng: &mut R,
    check: DominationCheck,
) -> Result<(ZrConfig, ZrConfig), ZrError> {
    if let Some(site) = lower.first_excess_over(upper) {
        return Err(ZrError::DominationViolated {
            site,
            time: lower.time(),
        });
    }
    check_end(lower, t_end)?;
    let mut lo = lower.clone();
    let mut up = upper.clone();
    let mut lo_sites = SiteSet::from_config(&lo);
    let mut up_sites = SiteSet::from_config(&up);
    let p = params.p();
    let mut time = lower.time().max(upper.time());
    loop {
        let total = p + up_sites.members.len() as f64;
        if total <= 0.0 {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        time += e / total;
        if time > t_end {
            break;
        }
        let u = rng.random::<f64>() * total;
        let touched = if u < p {
            inject(&mut lo, &mut lo_sites);
            inject(&mut up, &mut up_sites);
            [1, 1]
        } else {
            let x = up_sites.pick(rng);
            let right = rng.random::<f64>() < p;
            if lo.get(x) > 0 {
                shift(&mut lo, &mut lo_sites, x, right);
            }
            shift(&mut up, &mut up_sites, x, right);
            [x, if right { x + 1 } else { x.saturating_sub(1).max(1) }]
        };
        if check == DominationCheck::EveryEvent {
            for site in touched {
                if lo.get(site) > up.get(site) {
                    return Err(ZrError::DominationViolated { site, time });
                }
            }
        }
    }
    lo.trim();
    up.trim();
    lo.time = t_end;
    up.time = t_end;
    if let Some(site) = lo.first_excess_over(&up) {
        return Err(ZrError::DominationViolated { site, time: t_end });
    }
    Ok((lo, up))
}
