//! Closed-form and numerically exact predictions for the right-most
//! particle: centering and scaling sequences, Gumbel/Poisson limits, the
//! exact exceedance mean, its Gaussian surrogate, and the covariance and
//! sum-of-squares bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal;
use crate::profile::{self, ProfileError, StepProfile};
use crate::walk::{self, JumpKernel, KernelError, PmfTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("time {0} is too small: full scaling needs t > e")]
    TimeTooSmall(f64),
    #[error("L = {0} is too small: needs L ≥ 2")]
    LTooSmall(u64),
    #[error("time {0} must be positive")]
    TimeNotPositive(f64),
    #[error("the L_fast regime needs a positive constant c")]
    MissingC,
    #[error("σ = {sigma} and ρ̄ = {rho_bar} must satisfy σ > 0 and 0 < ρ̄ ≤ 1")]
    InvalidLawParameters { sigma: f64, rho_bar: f64 },
    #[error("the covariance bound is only evaluated for finite-range kernels")]
    InfiniteRangeUnsupported,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Full (periodic) step.
    Full,
    /// L-step with L ≈ c·√(t/log t); full scaling.
    LFast,
    /// L-step with L ≪ √(t/log t); scaling built on log L².
    LSlow,
}

/// Centering a and scale b such that X_t/(σb) − a has a limit law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPair {
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub regime: Regime,
    pub l: Option<u64>,
    pub c: Option<f64>,
}

/// a_t = log(t / (√(2π)·log t)), b_t = √(t / log t).
pub fn scaling_full(t: f64) -> Result<ScalingPair, TheoryError> {
    if !(t > std::f64::consts::E) {
        return Err(TheoryError::TimeTooSmall(t));
    }
    let lt = t.ln();
    Ok(ScalingPair {
        a: (t / ((2.0 * std::f64::consts::PI).sqrt() * lt)).ln(),
        b: (t / lt).sqrt(),
        t,
        regime: Regime::Full,
        l: None,
        c: None,
    })
}

/// a = log(L² / √(2π·log L²)), b = √(t / log L²).
#[allow(non_snake_case)]
pub fn scaling_L(t: f64, l: u64) -> Result<ScalingPair, TheoryError> {
    if l < 2 {
        return Err(TheoryError::LTooSmall(l));
    }
    if !(t > 0.0) {
        return Err(TheoryError::TimeNotPositive(t));
    }
    let l2 = (l as f64).powi(2);
    let ll = l2.ln();
    Ok(ScalingPair {
        a: (l2 / (2.0 * std::f64::consts::PI * ll).sqrt()).ln(),
        b: (t / ll).sqrt(),
        t,
        regime: Regime::LSlow,
        l: Some(l),
        c: None,
    })
}

/// Full scaling paired with L(t) = ⌈c·√(t/log t)⌉.
pub fn scaling_l_fast(t: f64, c: f64) -> Result<ScalingPair, TheoryError> {
    if !(c > 0.0) {
        return Err(TheoryError::MissingC);
    }
    let mut s = scaling_full(t)?;
    s.regime = Regime::LFast;
    s.l = Some(l_fast_length(t, c));
    s.c = Some(c);
    Ok(s)
}

/// ⌈c·√(t/log t)⌉.
pub fn l_fast_length(t: f64, c: f64) -> u64 {
    (c * (t / t.ln()).sqrt()).ceil() as u64
}

/// ⌊t^{1/4}⌋.
pub fn l_slow_length(t: f64) -> u64 {
    let mut l = t.powf(0.25).floor() as u64;
    // Guard against t^{1/4} landing just below an integer.
    while ((l + 1) as f64).powi(4) <= t {
        l += 1;
    }
    l
}

/// z = σ·b·(x + a).
pub fn threshold(scaling: &ScalingPair, sigma: f64, x: f64) -> f64 {
    sigma * scaling.b * (x + scaling.a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    Gumbel,
    Poisson,
}

/// Limit law exp(−λ_x) of the scaled right-most particle; λ_x is also the
/// mean of the limiting Poisson exceedance count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub kind: LawKind,
    pub regime: Regime,
    pub sigma: f64,
    pub rho_bar: f64,
    pub c: Option<f64>,
    /// λ_0; λ_x = λ_0·e^{−x}.
    pub rate: f64,
}

impl LimitLaw {
    pub fn lambda(&self, x: f64) -> f64 {
        self.rate * (-x).exp()
    }

    /// exp(−λ_x).
    pub fn cdf(&self, x: f64) -> f64 {
        (-self.lambda(x)).exp()
    }

    pub fn as_poisson(&self) -> Self {
        Self {
            kind: LawKind::Poisson,
            ..*self
        }
    }
}

pub fn limit_law(regime: Regime, sigma: f64, rho_bar: f64, c: Option<f64>) -> Result<LimitLaw, TheoryError> {
    if !(sigma > 0.0 && rho_bar > 0.0 && rho_bar <= 1.0) {
        return Err(TheoryError::InvalidLawParameters { sigma, rho_bar });
    }
    let rate = match regime {
        Regime::Full => sigma * rho_bar,
        Regime::LFast => {
            let c = c.filter(|c| *c > 0.0).ok_or(TheoryError::MissingC)?;
            sigma * rho_bar * (-(-c / sigma).exp_m1())
        }
        Regime::LSlow => rho_bar,
    };
    Ok(LimitLaw {
        kind: LawKind::Gumbel,
        regime,
        sigma,
        rho_bar,
        c: if regime == Regime::LFast { c } else { None },
        rate,
    })
}

/// Σ_{k ≤ m} λ_x^k e^{−λ_x}/k!: the limit CDF of the (m+1)-th right-most particle.
pub fn order_stat_limit_cdf(m: u64, x: f64, law: &LimitLaw) -> f64 {
    poisson_cdf(m, law.lambda(x))
}

pub fn poisson_cdf(m: u64, lambda: f64) -> f64 {
    let mut term = (-lambda).exp();
    let mut total = term;
    for k in 1..=m {
        term *= lambda / k as f64;
        total += term;
        if term < total * 1e-17 && k as f64 > lambda {
            break;
        }
    }
    total.min(1.0)
}

pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - libm::lgamma(k as f64 + 1.0)).exp()
}

/// A number with a bound on its absolute error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: f64,
    pub error: f64,
}

/// E[N_t(z)] = Σ_{i ≤ 0} ρ_i P_0(ξ_t > z − i), within `eps`.
///
/// Short horizons exhaust the Chernoff window before the budget is met;
/// the cut then comes from [`profile::radius_left_cut`].
pub fn expected_count(
    profile: &StepProfile,
    kernel: &JumpKernel,
    t: f64,
    z: f64,
    eps: f64,
) -> Result<Certified, TheoryError> {
    if !(t > 0.0) {
        return Err(TheoryError::TimeNotPositive(t));
    }
    let cut = match profile::left_cut(profile, kernel, t, z, eps / 2.0) {
        Err(ProfileError::ChernoffRangeExceeded { .. }) => profile::radius_left_cut(profile, kernel, t, z, eps / 2.0)?,
        other => other?,
    };
    let terms = (1 - cut) as f64;
    let table = walk::transition_pmf(kernel, t, (eps / (2.0 * terms)).min(walk::ORACLE_EPS))?;
    let value = expected_count_with(profile, &table, z, cut);
    Ok(Certified {
        value,
        error: eps / 2.0 + terms * table.eps(),
    })
}

/// Σ_{i=cut}^{0} ρ_i P(ξ > z − i) from a precomputed table.
pub fn expected_count_with(profile: &StepProfile, table: &PmfTable, z: f64, cut: i64) -> f64 {
    let tails = table.tails();
    let lo = profile.leftmost().map_or(cut, |l| l.max(cut));
    // Sum from the smallest terms up.
    (lo..=0)
        .map(|i| profile.density(i) * tails.above(z - i as f64))
        .sum()
}

/// Gaussian surrogate and limit constant of E[N_t].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanAsymptote {
    /// ρ̄·σ√t·(f(z/(σ√t)) − f((L+z)/(σ√t))).
    pub surrogate: f64,
    /// The t → ∞ limit of E[N_t].
    pub limit: f64,
}

pub fn mean_excess_asymptote(
    scaling: &ScalingPair,
    sigma: f64,
    rho_bar: f64,
    x: f64,
) -> Result<MeanAsymptote, TheoryError> {
    let law = limit_law(scaling.regime, sigma, rho_bar, scaling.c)?;
    let z = threshold(scaling, sigma, x);
    let scale = sigma * scaling.t.sqrt();
    let mut surrogate = normal::gaussian_mean_excess(z / scale);
    if let Some(l) = scaling.l {
        surrogate -= normal::gaussian_mean_excess((l as f64 + z) / scale);
    }
    Ok(MeanAsymptote {
        surrogate: rho_bar * scale * surrogate,
        limit: law.lambda(x),
    })
}

/// Trapezoid value with the difference to the half-resolution rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    pub resolution_error: f64,
    pub nodes: usize,
}

/// Minimum node count of the covariance quadrature grid.
pub const MIN_QUAD_NODES: usize = 200;

/// Upper bound on −Σ_{j≠k>z} Cov(η_t(j), η_t(k)):
/// 2 Σ_{i≥1} i²p_i Σ_k ∫₀ᵗ P_0(ξ_s = k)² P_0(ξ_{t−s} > z − k − i)² ds.
///
/// With `l` the squared pmf is replaced by [P_0(ξ_s = k) − P_0(ξ_s = k + L + 1)]².
/// The s-grid is logarithmic towards both endpoints with at least
/// `max(nodes, 200)` points.
pub fn covariance_bound(
    kernel: &JumpKernel,
    t: f64,
    z: f64,
    l: Option<u64>,
    nodes: usize,
) -> Result<Quadrature, TheoryError> {
    if !kernel.is_finite_range() {
        return Err(TheoryError::InfiniteRangeUnsupported);
    }
    if t < 0.0 || t.is_nan() {
        return Err(TheoryError::TimeNotPositive(t));
    }
    if t == 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            resolution_error: 0.0,
            nodes: 0,
        });
    }
    let grid = endpoint_grid(t, nodes.max(MIN_QUAD_NODES));
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&s| covariance_integrand(kernel, s, t - s, z, l))
        .collect::<Result<_, _>>()?;
    let full = trapezoid(&grid, &values);
    let coarse_s: Vec<f64> = grid.iter().step_by(2).copied().collect();
    let coarse_v: Vec<f64> = values.iter().step_by(2).copied().collect();
    let mut coarse = trapezoid(&coarse_s, &coarse_v);
    if !(grid.len() - 1).is_multiple_of(2) {
        // Close the coarse rule on the last panel.
        let n = grid.len();
        coarse += 0.5 * (grid[n - 1] - grid[n - 2]) * (values[n - 1] + values[n - 2]);
    }
    Ok(Quadrature {
        value: full,
        resolution_error: (full - coarse).abs(),
        nodes: grid.len(),
    })
}

/// Nodes on [0, t], geometrically refined towards both ends.
fn endpoint_grid(t: f64, nodes: usize) -> Vec<f64> {
    let half = nodes.div_ceil(2).max(8);
    let h = 0.5 * t;
    let decades = 8.0;
    let mut left: Vec<f64> = vec![0.0];
    for j in 0..half {
        let e = -decades * (1.0 - j as f64 / (half - 1) as f64);
        left.push(h * 10f64.powf(e));
    }
    let mut grid = left.clone();
    for &s in left.iter().rev().skip(1) {
        grid.push(t - s);
    }
    grid.dedup();
    grid
}

fn trapezoid(s: &[f64], v: &[f64]) -> f64 {
    s.windows(2)
        .zip(v.windows(2))
        .map(|(s, v)| 0.5 * (s[1] - s[0]) * (v[0] + v[1]))
        .sum()
}

fn covariance_integrand(kernel: &JumpKernel, s: f64, rest: f64, z: f64, l: Option<u64>) -> Result<f64, TheoryError> {
    let p = walk::transition_pmf(kernel, s, walk::ORACLE_EPS)?;
    let tails = walk::transition_pmf(kernel, rest, walk::ORACLE_EPS)?.tails();
    let k_max = p.half_width();
    let gap = l.map(|l| l as i64 + 1);
    let mut total = 0.0;
    for (i, pi) in kernel.one_sided() {
        let mut inner = 0.0;
        let lo = -k_max - gap.unwrap_or(0);
        for k in lo..=k_max {
            let mass = match gap {
                None => p.prob(k),
                Some(g) => p.prob(k) - p.prob(k + g),
            };
            if mass == 0.0 {
                continue;
            }
            let tail = tails.above(z - (k + i) as f64);
            inner += mass * mass * tail * tail;
        }
        total += (i * i) as f64 * pi * inner;
    }
    Ok(2.0 * total)
}

/// e^{−z²/(2σ²t)}·E[N_t].
pub fn sum_of_squares_bound(expected: f64, t: f64, z: f64, sigma: f64) -> f64 {
    if z == 0.0 {
        return expected;
    }
    (-(z * z) / (2.0 * sigma * sigma * t)).exp() * expected
}

/// Σ_{k>z} (E[η_t(k)])² with E[η_t(k)] = Σ_i ρ_i P_0(ξ_t = k − i), by brute force.
pub fn occupation_square_sum(
    profile: &StepProfile,
    kernel: &JumpKernel,
    t: f64,
    z: f64,
    eps: f64,
) -> Result<f64, TheoryError> {
    let cut = profile::left_cut(profile, kernel, t, z.max(1.0), eps)?;
    let table = walk::transition_pmf(kernel, t, walk::ORACLE_EPS)?;
    let lo = profile.leftmost().map_or(cut, |l| l.max(cut));
    let k_hi = table.half_width();
    let mut total = 0.0;
    let mut k = z.floor() as i64 + 1;
    while k <= k_hi {
        let mean: f64 = (lo..=0).map(|i| profile.density(i) * table.prob(k - i)).sum();
        total += mean * mean;
        k += 1;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scaling_at_hundred() {
        let s = scaling_full(100.0).unwrap();
        assert!((s.a - 2.15905202697551751703520800365).abs() < 1e-13);
        assert!((s.b - 4.65990601784656075294831218024).abs() < 1e-13);
        assert!((threshold(&s, 1.0, 0.0) - 10.0609795333470290989322395068).abs() < 1e-12);
        assert_eq!(threshold(&s, 1.0, -s.a), 0.0);
        assert!(matches!(scaling_full(2.0), Err(TheoryError::TimeTooSmall(_))));
    }

    #[test]
    fn centering_is_positive_and_increasing() {
        // t/(√(2π) log t) ≥ e/√(2π) > 1 for t > e, so a_t never reaches 0.
        let mut last = f64::MIN;
        let mut t = 10.0;
        while t < 1e9 {
            let s = scaling_full(t).unwrap();
            assert!(s.a > 0.0 && s.a > last);
            last = s.a;
            t *= 1.7;
        }
    }

    #[test]
    fn l_scaling() {
        let s = scaling_L(100.0, 10).unwrap();
        assert!((s.a - 2.92264183987946807164543058831).abs() < 1e-13);
        assert!((s.b - 4.65990601784656075294831218024).abs() < 1e-13);
        assert!(matches!(scaling_L(100.0, 1), Err(TheoryError::LTooSmall(1))));
        let a = scaling_L(400.0, 10).unwrap();
        assert!((a.b / s.b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn limit_laws() {
        let full = limit_law(Regime::Full, 1.0, 1.0, None).unwrap();
        assert!((full.cdf(0.0) - (-1f64).exp()).abs() < 1e-16);
        let slow = limit_law(Regime::LSlow, 2.0, 1.0, None).unwrap();
        assert!((slow.cdf(0.0) - (-1f64).exp()).abs() < 1e-16);
        let fast = limit_law(Regime::LFast, 1.3, 0.5, Some(1e3)).unwrap();
        let full2 = limit_law(Regime::Full, 1.3, 0.5, None).unwrap();
        assert!((fast.lambda(0.4) - full2.lambda(0.4)).abs() < 1e-15);
        assert_eq!(limit_law(Regime::LFast, 1.0, 1.0, None), Err(TheoryError::MissingC));
    }

    #[test]
    fn order_statistic_cdf() {
        let law = limit_law(Regime::Full, 1.0, 1.0, None).unwrap();
        assert!((order_stat_limit_cdf(0, 0.7, &law) - law.cdf(0.7)).abs() < 1e-16);
        assert!((order_stat_limit_cdf(1, 0.0, &law) - 2.0 * (-1f64).exp()).abs() < 1e-15);
        assert!((order_stat_limit_cdf(200, -3.0, &law) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_of_squares_at_zero_threshold() {
        assert_eq!(sum_of_squares_bound(0.8, 10.0, 0.0, 1.0), 0.8);
    }

    #[test]
    fn covariance_bound_vanishes_at_zero() {
        let k = JumpKernel::nearest_neighbor();
        assert_eq!(covariance_bound(&k, 0.0, 3.0, None, 200).unwrap().value, 0.0);
        let inf = JumpKernel::with_envelope(&[(1, 0.5)], 0.5, walk::TailEnvelope { amplitude: 1.0, ratio: 0.5 }).unwrap();
        assert_eq!(
            covariance_bound(&inf, 10.0, 3.0, None, 200),
            Err(TheoryError::InfiniteRangeUnsupported)
        );
    }

    #[test]
    fn grid_shape() {
        let g = endpoint_grid(100.0, 200);
        assert!(g.len() >= 200);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 100.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
