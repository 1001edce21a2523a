//! Continuous-time symmetric random walk ξ_t on ℤ.
//!
//! The walk jumps at rate 1 with a symmetric displacement law {p_i}. All
//! exact numerics (transition tables, tails, Chernoff bounds, local CLT
//! comparisons) used by the simulation oracles and the limit theory live
//! here.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conv;
use crate::normal;

/// Truncation tolerance for tables used as numerical oracles.
pub const ORACLE_EPS: f64 = 1e-10;
/// Truncation tolerance inside large parameter sweeps.
pub const SWEEP_EPS: f64 = 1e-6;
/// Tolerance on the total mass supplied to [`JumpKernel::new`].
const NORMALIZATION_TOL: f64 = 1e-9;
/// Largest half-width a transition table may reach.
const MAX_HALF_WIDTH: usize = 1 << 22;
/// Work (multiply-adds) above which uniformization hands over to squaring.
const UNIFORMIZATION_BUDGET: f64 = 4e6;
/// Round-off allowance added to the certificate of FFT-squared tables.
const FFT_ROUNDING: f64 = 1e-14;
/// Round-off allowance for directly convolved tables.
const DIRECT_ROUNDING: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("jump kernel has empty support")]
    EmptySupport,
    #[error("offset 0 is not a jump")]
    ZeroOffset,
    #[error("probability {prob} for offset {offset} is negative or not finite")]
    InvalidProbability { offset: i64, prob: f64 },
    #[error("offsets {offset} and {mirror} carry different probabilities ({prob} vs {mirror_prob})")]
    AsymmetricInput {
        offset: i64,
        mirror: i64,
        prob: f64,
        mirror_prob: f64,
    },
    #[error("total mass after symmetric closure is {total}, expected 1")]
    NonNormalized { total: f64 },
    #[error("exponential-moment radius θ = {theta} must be positive and finite")]
    InvalidTheta { theta: f64 },
    #[error("Σ e^(θi) p_i is not certified finite: θ = {theta} but the tail envelope ratio is {ratio}")]
    InfiniteMgf { theta: f64, ratio: f64 },
    #[error("tail envelope invalid: {0}")]
    InvalidEnvelope(String),
    #[error("time {0} is negative")]
    TimeNegative(f64),
    #[error("time {0} must be positive")]
    TimeNotPositive(f64),
    #[error("tolerance {0} outside (0, 1)")]
    InvalidTolerance(f64),
    #[error("truncation error {requested:e} is not reachable (best certified: {achievable:e})")]
    TruncationBudgetExceeded { requested: f64, achievable: f64 },
    #[error("x = {x} is outside the Chernoff window [0, {limit}]")]
    OutOfChernoffRange { x: f64, limit: f64 },
}

/// Geometric bound p_i ≤ amplitude · ratio^|i| for the unlisted tail of an
/// infinite-range kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub amplitude: f64,
    pub ratio: f64,
}

/// A symmetric jump law {p_i} with certified exponential moments.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpKernel {
    /// Positive offsets, strictly increasing.
    offsets: Vec<i64>,
    /// p_i for each positive offset; p_{-i} is the same value.
    probs: Vec<f64>,
    sigma2: f64,
    theta: f64,
    envelope: Option<TailEnvelope>,
}

impl JumpKernel {
    /// Builds a finite-range kernel from `(offset, prob)` pairs.
    ///
    /// Pairs describe one side of the law: `(i, p)` sets `p_i = p_{-i} = p`.
    /// A negative offset is accepted as naming the same pair; if both `i`
    /// and `-i` are listed they must agree.
    pub fn new(pairs: &[(i64, f64)], theta: f64) -> Result<Self, KernelError> {
        Self::build(pairs, theta, None)
    }

    /// Builds a kernel whose listed support is a truncation of an
    /// infinite-range law, certified by a geometric tail envelope.
    pub fn with_envelope(
        pairs: &[(i64, f64)],
        theta: f64,
        envelope: TailEnvelope,
    ) -> Result<Self, KernelError> {
        Self::build(pairs, theta, Some(envelope))
    }

    /// p_{±1} = 1/2 with θ = 1.
    pub fn nearest_neighbor() -> Self {
        Self::new(&[(1, 0.5)], 1.0).expect("nearest-neighbor kernel is valid")
    }

    fn build(
        pairs: &[(i64, f64)],
        theta: f64,
        envelope: Option<TailEnvelope>,
    ) -> Result<Self, KernelError> {
        if pairs.is_empty() {
            return Err(KernelError::EmptySupport);
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(KernelError::InvalidTheta { theta });
        }
        let mut side: std::collections::BTreeMap<i64, (i64, f64)> = Default::default();
        for &(offset, prob) in pairs {
            if offset == 0 {
                return Err(KernelError::ZeroOffset);
            }
            if !(prob.is_finite() && prob >= 0.0) {
                return Err(KernelError::InvalidProbability { offset, prob });
            }
            match side.get(&offset.abs()) {
                Some(&(seen, seen_prob)) if seen == offset => {
                    // Repeated entry for the same offset: masses add up.
                    side.insert(offset.abs(), (offset, seen_prob + prob));
                }
                Some(&(seen, seen_prob)) => {
                    if (seen_prob - prob).abs() > NORMALIZATION_TOL {
                        return Err(KernelError::AsymmetricInput {
                            offset: seen,
                            mirror: offset,
                            prob: seen_prob,
                            mirror_prob: prob,
                        });
                    }
                }
                None => {
                    side.insert(offset.abs(), (offset, prob));
                }
            }
        }
        let (offsets, probs): (Vec<i64>, Vec<f64>) = side
            .into_iter()
            .filter(|(_, (_, p))| *p > 0.0)
            .map(|(k, (_, p))| (k, p))
            .unzip();
        if offsets.is_empty() {
            return Err(KernelError::EmptySupport);
        }
        let total: f64 = 2.0 * probs.iter().sum::<f64>();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(KernelError::NonNormalized { total });
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();

        if let Some(env) = envelope {
            if !(env.ratio > 0.0 && env.ratio < 1.0) {
                return Err(KernelError::InvalidEnvelope(format!(
                    "ratio {} must lie in (0, 1)",
                    env.ratio
                )));
            }
            if !(env.amplitude.is_finite() && env.amplitude > 0.0) {
                return Err(KernelError::InvalidEnvelope(format!(
                    "amplitude {} must be positive",
                    env.amplitude
                )));
            }
            for (&i, &p) in offsets.iter().zip(&probs) {
                if p > env.amplitude * env.ratio.powi(i as i32) * (1.0 + 1e-12) {
                    return Err(KernelError::InvalidEnvelope(format!(
                        "p_{i} = {p} exceeds the envelope"
                    )));
                }
            }
            if theta >= -env.ratio.ln() {
                return Err(KernelError::InfiniteMgf {
                    theta,
                    ratio: env.ratio,
                });
            }
        }

        let sigma2 = 2.0
            * offsets
                .iter()
                .zip(&probs)
                .map(|(&i, &p)| (i * i) as f64 * p)
                .sum::<f64>();
        Ok(Self {
            offsets,
            probs,
            sigma2,
            theta,
            envelope,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn envelope(&self) -> Option<TailEnvelope> {
        self.envelope
    }

    pub fn is_finite_range(&self) -> bool {
        self.envelope.is_none()
    }

    /// Largest |offset| when the kernel is finite range.
    pub fn range(&self) -> Option<i64> {
        self.is_finite_range().then(|| self.max_offset())
    }

    /// Largest listed |offset|; the simulated support is always this finite set.
    pub fn max_offset(&self) -> i64 {
        *self.offsets.last().expect("support is nonempty")
    }

    /// `(i, p_i)` for i > 0.
    pub fn one_sided(&self) -> impl DoubleEndedIterator<Item = (i64, f64)> + '_ {
        self.offsets.iter().copied().zip(self.probs.iter().copied())
    }

    /// Full signed support in increasing order.
    pub fn signed_support(&self) -> Vec<(i64, f64)> {
        let mut v: Vec<(i64, f64)> = self.one_sided().rev().map(|(i, p)| (-i, p)).collect();
        v.extend(self.one_sided());
        v
    }

    pub fn prob(&self, offset: i64) -> f64 {
        match self.offsets.binary_search(&offset.abs()) {
            Ok(idx) => self.probs[idx],
            Err(_) => 0.0,
        }
    }

    /// Whether this is the nearest-neighbor law p_{±1} = 1/2.
    pub fn is_nearest_neighbor(&self) -> bool {
        self.offsets == [1]
    }

    /// Upper bound on E[e^{λ ξ_1-step}] = Σ_i e^{λi} p_i, including the
    /// envelope bound on any unlisted tail.
    pub fn mgf(&self, lambda: f64) -> f64 {
        let listed: f64 = self
            .one_sided()
            .map(|(i, p)| 2.0 * p * (lambda * i as f64).cosh())
            .sum();
        listed + self.envelope_mgf(lambda)
    }

    /// Envelope bound on Σ_{|i|>R} e^{λi} p_i beyond the listed support.
    fn envelope_mgf(&self, lambda: f64) -> f64 {
        match self.envelope {
            None => 0.0,
            Some(env) => {
                let r = self.max_offset() as i32 + 1;
                let up = env.ratio * lambda.exp();
                let down = env.ratio * (-lambda).exp();
                if up >= 1.0 {
                    return f64::INFINITY;
                }
                env.amplitude * (up.powi(r) / (1.0 - up) + down.powi(r) / (1.0 - down))
            }
        }
    }

    /// log E[e^{λ ξ_t}] / t = M(λ) − 1 for the rate-1 continuous-time walk.
    pub fn cumulant(&self, lambda: f64) -> f64 {
        // M(λ) − 1 = Σ 2p_i (cosh(λi) − 1) keeps precision for small λ.
        let listed: f64 = self
            .one_sided()
            .map(|(i, p)| {
                let h = 0.5 * lambda * i as f64;
                4.0 * p * h.sinh().powi(2)
            })
            .sum();
        listed + self.envelope_mgf(lambda)
    }

    /// Largest λ at which the moment generating function is used for
    /// truncation planning.
    fn planning_radius(&self) -> f64 {
        match self.envelope {
            None => self.theta.max(8.0 / self.max_offset() as f64),
            Some(_) => self.theta,
        }
    }
}

/// Structured-text kernel description: one-sided `(offset, prob)` pairs,
/// θ and an optional `(A, r)` tail envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub offsets: Vec<(i64, f64)>,
    pub theta: f64,
    #[serde(default)]
    pub envelope: Option<(f64, f64)>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<JumpKernel, KernelError> {
        match self.envelope {
            None => JumpKernel::new(&self.offsets, self.theta),
            Some((amplitude, ratio)) => {
                JumpKernel::with_envelope(&self.offsets, self.theta, TailEnvelope { amplitude, ratio })
            }
        }
    }
}

/// Build a kernel from one-sided `(offset, prob)` pairs.
pub fn build_kernel(pairs: &[(i64, f64)], theta: f64) -> Result<JumpKernel, KernelError> {
    JumpKernel::new(pairs, theta)
}

/// P_0(ξ_t = k) on a symmetric window [−K, K].
#[derive(Clone, Debug, PartialEq)]
pub struct PmfTable {
    t: f64,
    half_width: usize,
    values: Vec<f64>,
    eps: f64,
}

impl PmfTable {
    fn point_mass(t: f64) -> Self {
        Self {
            t,
            half_width: 0,
            values: vec![1.0],
            eps: 0.0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn half_width(&self) -> i64 {
        self.half_width as i64
    }

    /// Certified bound on the probability mass missing from the table.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Values for k = −K..=K.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn prob(&self, k: i64) -> f64 {
        let idx = k + self.half_width as i64;
        if idx < 0 || idx as usize >= self.values.len() {
            0.0
        } else {
            self.values[idx as usize]
        }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let k0 = -(self.half_width as i64);
        self.values.iter().enumerate().map(move |(i, &p)| (k0 + i as i64, p))
    }

    /// P(ξ_t > z) from the table; under-estimates by at most `eps / 2`.
    pub fn tail_above(&self, z: f64) -> f64 {
        self.tails().above(z)
    }

    pub fn tails(&self) -> TailTable {
        TailTable::new(self)
    }

    /// Distribution of the sum of two independent walks (times add).
    pub fn convolve(&self, other: &PmfTable) -> PmfTable {
        let values = conv::convolve(&self.values, &other.values);
        PmfTable {
            t: self.t + other.t,
            half_width: self.half_width + other.half_width,
            values,
            eps: self.eps + other.eps,
        }
    }

    /// Σ_k |P(k) − Q(k)| / 2 over the union of both windows.
    pub fn total_variation(&self, other: &PmfTable) -> f64 {
        let k = self.half_width.max(other.half_width) as i64;
        0.5 * (-k..=k).map(|x| (self.prob(x) - other.prob(x)).abs()).sum::<f64>()
    }

    /// CSV with columns `k,prob`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,prob")?;
        for (k, p) in self.iter() {
            writeln!(out, "{k},{p:.16e}")?;
        }
        Ok(())
    }
}

/// Suffix sums of a [`PmfTable`]: `above(z) = P(ξ_t > z)`.
#[derive(Clone, Debug)]
pub struct TailTable {
    half_width: i64,
    /// suffix[k + K + 1] = Σ_{j > k} P(j), for k in −K−1..=K.
    suffix: Vec<f64>,
}

impl TailTable {
    fn new(table: &PmfTable) -> Self {
        let n = table.values.len();
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + table.values[i];
        }
        Self {
            half_width: table.half_width as i64,
            suffix,
        }
    }

    /// P(ξ_t > z); "ξ > z" is the integer comparison with real z.
    pub fn above(&self, z: f64) -> f64 {
        let k = z.floor();
        if k >= self.half_width as f64 {
            return 0.0;
        }
        if k < -(self.half_width as f64) - 1.0 {
            return self.suffix[0];
        }
        let k = k as i64;
        self.suffix[(k + self.half_width + 1) as usize]
    }

    /// P(ξ_t ≥ k) for integer k.
    pub fn at_least(&self, k: i64) -> f64 {
        self.above(k as f64 - 1.0)
    }
}

fn check_time(t: f64) -> Result<(), KernelError> {
    if t.is_nan() || t < 0.0 {
        return Err(KernelError::TimeNegative(t));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), KernelError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(KernelError::InvalidTolerance(eps));
    }
    Ok(())
}

/// Transition law P_0(ξ_t = k) truncated so that the missing mass is < eps.
///
/// Small problems are solved by uniformization, Σ_n e^{−t}tⁿ/n!·p^{*n},
/// with direct convolutions. Larger ones start from a uniformized table at
/// t/2^s ≤ 1/2 and square it s times. Every truncation is tracked so the
/// reported `eps` bounds the discarded mass.
pub fn transition_pmf(kernel: &JumpKernel, t: f64, eps: f64) -> Result<PmfTable, KernelError> {
    check_time(t)?;
    check_eps(eps)?;
    if t == 0.0 {
        return Ok(PmfTable::point_mass(0.0));
    }
    let mut budget = eps;
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let table = compute_table(kernel, t, budget, None, UNIFORMIZATION_BUDGET)?;
        if table.eps < eps {
            return Ok(table);
        }
        best = best.min(table.eps);
        budget /= 16.0;
    }
    Err(KernelError::TruncationBudgetExceeded {
        requested: eps,
        achievable: best,
    })
}

/// Transition table on the explicit window [−half_width, half_width].
///
/// The table is accurate to full relative precision wherever it is
/// computed by uniformization, which makes it the tool for far-tail
/// checks; the certificate still reports the mass outside the window.
pub fn transition_pmf_on(
    kernel: &JumpKernel,
    t: f64,
    half_width: usize,
) -> Result<PmfTable, KernelError> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(PmfTable::point_mass(0.0));
    }
    compute_table(kernel, t, 1e-14, Some(half_width), UNIFORMIZATION_BUDGET)
}

fn compute_table(
    kernel: &JumpKernel,
    t: f64,
    budget: f64,
    forced: Option<usize>,
    work_limit: f64,
) -> Result<PmfTable, KernelError> {
    let n_hi = poisson_upper_index(t, budget / 4.0);
    let r = kernel.max_offset() as usize;
    let support = 2 * kernel.offsets.len();
    let planned = match forced {
        Some(k) => k,
        None => half_width_for(kernel, t, budget / 8.0)?,
    };
    let k = planned.min(n_hi.saturating_mul(r));
    let work = n_hi as f64 * (2 * k + 1) as f64 * support as f64;
    if work <= work_limit || forced.is_some() && t <= 64.0 {
        let (values, deficit) = uniformize(kernel, t, k, n_hi);
        return Ok(finish(t, k, values, deficit, DIRECT_ROUNDING));
    }

    let mut stages = 1u32;
    while t / f64::from(1u32 << stages.min(31)) > 0.5 && stages < 62 {
        stages += 1;
    }
    let base_t = t / 2f64.powi(stages as i32);
    // The deficit roughly doubles at every squaring, so stage i gets a
    // budget scaled by 2^-(stages - i).
    let share = budget / (4.0 * (stages as f64 + 1.0));
    let base_budget = share / 2f64.powi(stages as i32);
    let base_hi = poisson_upper_index(base_t, base_budget / 2.0);
    let base_k = half_width_for(kernel, base_t, base_budget / 4.0)?.min(base_hi * r);
    let (mut values, mut deficit) = uniformize(kernel, base_t, base_k, base_hi);
    rescale(&mut values, deficit);
    let mut half = base_k;
    let mut cur_t = base_t;
    for stage in 1..=stages {
        cur_t *= 2.0;
        let stage_budget = share / 2f64.powi((stages - stage) as i32);
        let mut target = half_width_for(kernel, cur_t, stage_budget)?;
        if stage == stages {
            if let Some(f) = forced {
                target = f;
            }
        }
        let squared = conv::convolve(&values, &values);
        let natural = 2 * half;
        let keep = target.min(natural);
        let cut = natural - keep;
        let dropped: f64 = squared[..cut].iter().sum::<f64>() + squared[squared.len() - cut..].iter().sum::<f64>();
        values = squared[cut..squared.len() - cut].to_vec();
        deficit = 2.0 * deficit - deficit * deficit + dropped;
        rescale(&mut values, deficit);
        half = keep;
    }
    symmetrize(&mut values);
    Ok(finish(t, half, values, deficit, FFT_ROUNDING * (stages as f64 + 1.0)))
}

fn finish(t: f64, half: usize, mut values: Vec<f64>, deficit: f64, rounding: f64) -> PmfTable {
    symmetrize(&mut values);
    let mass: f64 = values.iter().sum();
    if mass > 1.0 {
        values.iter_mut().for_each(|v| *v /= mass);
    }
    let observed = (1.0 - mass).max(0.0);
    PmfTable {
        t,
        half_width: half,
        values,
        eps: (deficit + rounding).max(observed),
    }
}

/// Squaring doubles any relative error in the total mass, so each stage is
/// pinned to the tracked mass 1 − deficit before the next one.
fn rescale(values: &mut [f64], deficit: f64) {
    let mass: f64 = values.iter().sum();
    if mass > 0.0 {
        let f = (1.0 - deficit) / mass;
        values.iter_mut().for_each(|v| *v *= f);
    }
}

fn symmetrize(values: &mut [f64]) {
    let n = values.len();
    for i in 0..n / 2 {
        let m = 0.5 * (values[i] + values[n - 1 - i]);
        values[i] = m;
        values[n - 1 - i] = m;
    }
}

/// Σ_n w_n p^{*n} on [−k, k] with n ≤ n_hi; returns values and tracked deficit.
fn uniformize(kernel: &JumpKernel, t: f64, k: usize, n_hi: usize) -> (Vec<f64>, f64) {
    let steps = kernel.signed_support();
    let width = 2 * k + 1;
    let mut out = vec![0.0; width];
    let mut v = vec![1.0];
    let mut h = 0usize;
    let mut v_deficit = 0.0;
    let mut deficit = 0.0;
    let ln_t = t.ln();
    let mut included = 0.0;
    for n in 0..=n_hi {
        let log_w = -t + n as f64 * ln_t - libm::lgamma(n as f64 + 1.0);
        let w = log_w.exp();
        included += w;
        if w > 0.0 {
            let off = k - h;
            for (o, &x) in out[off..off + v.len()].iter_mut().zip(&v) {
                *o += w * x;
            }
            deficit += w * v_deficit;
        }
        if n == n_hi {
            break;
        }
        let r = kernel.max_offset() as usize;
        let nh = (h + r).min(k);
        let mut next = vec![0.0; 2 * nh + 1];
        for (i, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let site = i as i64 - h as i64;
            for &(j, p) in &steps {
                let target = site + j;
                if target.unsigned_abs() as usize <= nh {
                    next[(target + nh as i64) as usize] += x * p;
                } else {
                    v_deficit += x * p;
                }
            }
        }
        v = next;
        h = nh;
    }
    deficit += poisson_tail_bound(t, n_hi).max(1.0 - included).max(0.0);
    (out, deficit)
}

/// Upper bound on P(Pois(t) > n) for n + 2 > t.
fn poisson_tail_bound(t: f64, n: usize) -> f64 {
    let m = n as f64 + 1.0;
    if m + 1.0 <= t {
        return 1.0;
    }
    let log_w = -t + m * t.ln() - libm::lgamma(m + 1.0);
    log_w.exp() * (m + 1.0) / (m + 1.0 - t)
}

/// Smallest n > t with P(Pois(t) > n) ≤ tol.
fn poisson_upper_index(t: f64, tol: f64) -> usize {
    let mut n = t.ceil() as usize + 1;
    let step = (t.sqrt().ceil() as usize).max(1);
    while poisson_tail_bound(t, n) > tol {
        n += step;
    }
    // Walk back to the tightest index.
    while n > t.ceil() as usize + 1 && poisson_tail_bound(t, n - 1) <= tol {
        n -= 1;
    }
    n
}

/// min over λ ∈ (0, radius] of −λx + t·cumulant(λ); a bound on log P(ξ_t ≥ x).
fn optimized_log_tail(kernel: &JumpKernel, t: f64, x: f64) -> f64 {
    let f = |l: f64| -l * x + t * kernel.cumulant(l);
    let (mut lo, mut hi) = (0.0, kernel.planning_radius());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi)).min(0.0)
}

/// Smallest K with P(|ξ_t| > K) ≤ mass by the Chernoff bound.
fn half_width_for(kernel: &JumpKernel, t: f64, mass: f64) -> Result<usize, KernelError> {
    let log_target = (mass / 2.0).ln();
    let ok = |k: usize| optimized_log_tail(kernel, t, k as f64 + 1.0) <= log_target;
    let mut hi = ((8.0 * (kernel.sigma2() * t).sqrt()) as usize).max(1);
    while !ok(hi) {
        hi = hi.saturating_mul(2);
        if hi > MAX_HALF_WIDTH {
            return Err(KernelError::TruncationBudgetExceeded {
                requested: mass,
                achievable: (2.0 * optimized_log_tail(kernel, t, MAX_HALF_WIDTH as f64).exp()).min(1.0),
            });
        }
    }
    let mut lo = 0usize;
    if ok(lo) {
        return Ok(0);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// P_0(ξ_t > z) within eps.
///
/// By translation invariance P_i(ξ_t > z) = P_0(ξ_t > z − i).
pub fn tail_prob(kernel: &JumpKernel, t: f64, z: f64, eps: f64) -> Result<f64, KernelError> {
    Ok(transition_pmf(kernel, t, eps)?.tail_above(z))
}

/// Chernoff bound on log P(ξ_t ≥ x) at λ = x/(σ²t): −λx + t·(M(λ) − 1).
pub fn chernoff_log_tail(kernel: &JumpKernel, t: f64, x: f64) -> Result<f64, KernelError> {
    check_time(t)?;
    let limit = kernel.sigma2() * kernel.theta() * t;
    if !(x >= 0.0 && x <= limit * (1.0 + 1e-12)) {
        return Err(KernelError::OutOfChernoffRange { x, limit });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lambda = x / (kernel.sigma2() * t);
    Ok(-lambda * x + t * kernel.cumulant(lambda))
}

/// Gaussian comparator f_t(x) = (2πσ²t)^{-1/2} e^{−x²/(2σ²t)}.
///
/// Panics if `t` is not positive.
pub fn local_clt_density(kernel: &JumpKernel, t: f64, x: i64) -> f64 {
    assert!(t > 0.0, "local_clt_density needs t > 0, got {t}");
    let v = kernel.sigma2() * t;
    let x = x as f64;
    (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// |x| ≤ 2σ√(t log t): the window on which local-CLT comparisons are reported.
pub fn local_clt_window(kernel: &JumpKernel, t: f64) -> f64 {
    2.0 * kernel.sigma() * (t * t.max(std::f64::consts::E).ln()).sqrt()
}

/// E[(X − u)^+] for standard normal X.
pub fn gaussian_mean_excess(u: f64) -> f64 {
    normal::gaussian_mean_excess(u)
}

/// Σ_x |P(ξ_t = x) − P(ξ_t = x + y)|, accurate to 2·eps.
pub fn pmf_shift_distance(kernel: &JumpKernel, t: f64, y: i64, eps: f64) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::TimeNotPositive(t));
    }
    let table = transition_pmf(kernel, t, eps)?;
    Ok(shift_distance(&table, y))
}

pub(crate) fn shift_distance(table: &PmfTable, y: i64) -> f64 {
    if y == 0 {
        return 0.0;
    }
    let k = table.half_width();
    (-k - y.abs()..=k + y.abs())
        .map(|x| (table.prob(x) - table.prob(x + y)).abs())
        .sum()
}

/// max_x |Δ_t(x + y) − Δ_t(x)| with Δ_t(x) = P(ξ_t = x) − f_t(x).
pub fn grad_residual_distance(
    kernel: &JumpKernel,
    t: f64,
    y: i64,
    eps: f64,
) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::TimeNotPositive(t));
    }
    if y == 0 {
        return Ok(0.0);
    }
    let table = transition_pmf(kernel, t, eps)?;
    let k = table.half_width();
    let residual = |x: i64| table.prob(x) - local_clt_density(kernel, t, x);
    Ok((-k - y.abs()..=k + y.abs())
        .map(|x| (residual(x + y) - residual(x)).abs())
        .fold(0.0, f64::max))
}

/// |1 − P_0(ξ_t > σ·x·√t) / P(X > x)| for standard normal X.
pub fn normal_tail_ratio_error(kernel: &JumpKernel, t: f64, x_scaled: f64) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::TimeNotPositive(t));
    }
    let walk = tail_prob(kernel, t, kernel.sigma() * x_scaled * t.sqrt(), ORACLE_EPS)?;
    Ok((1.0 - walk / normal::upper_tail(x_scaled)).abs())
}
