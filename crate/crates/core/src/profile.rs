//! Periodic step initial profiles, optional L-truncation, left cuts and
//! Bernoulli sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::walk::{self, JumpKernel, KernelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile needs at least one density")]
    EmptyDensities,
    #[error("all densities are zero")]
    AllZeroDensities,
    #[error("density {value} at index {index} is outside [0, 1]")]
    DensityOutOfRange { index: usize, value: f64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("left cut left the Chernoff window at depth {depth} (tail bound {bound:e} still above {eps:e})")]
    ChernoffRangeExceeded { depth: i64, bound: f64, eps: f64 },
    #[error("configuration sites must be strictly increasing and ≥ the left boundary")]
    InvalidConfiguration,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// ρ_x = ρ_{x−m} for x ≤ −1, ρ_0 = 1, ρ_x = 0 for x > 0, optionally
/// restricted to −L..0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    /// ρ_{−1}, …, ρ_{−m}.
    densities: Vec<f64>,
    l_cut: Option<u64>,
    rho_bar: f64,
}

/// Structured-text profile description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub densities: Vec<f64>,
    #[serde(default)]
    pub l_cut: Option<u64>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<StepProfile, ProfileError> {
        make_profile(&self.densities, self.l_cut)
    }
}

pub fn make_profile(densities: &[f64], l_cut: Option<u64>) -> Result<StepProfile, ProfileError> {
    StepProfile::new(densities, l_cut)
}

impl StepProfile {
    pub fn new(densities: &[f64], l_cut: Option<u64>) -> Result<Self, ProfileError> {
        if densities.is_empty() {
            return Err(ProfileError::EmptyDensities);
        }
        for (index, &value) in densities.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::DensityOutOfRange { index, value });
            }
        }
        if densities.iter().all(|&d| d == 0.0) {
            return Err(ProfileError::AllZeroDensities);
        }
        let rho_bar = densities.iter().sum::<f64>() / densities.len() as f64;
        Ok(Self {
            densities: densities.to_vec(),
            l_cut,
            rho_bar,
        })
    }

    /// Every site ≤ 0 occupied.
    pub fn full_step() -> Self {
        Self::new(&[1.0], None).expect("full step is valid")
    }

    pub fn period(&self) -> usize {
        self.densities.len()
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn l_cut(&self) -> Option<u64> {
        self.l_cut
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    /// Whether every site ≤ 0 is occupied with certainty.
    pub fn is_full_step(&self) -> bool {
        self.l_cut.is_none() && self.densities.iter().all(|&d| d == 1.0)
    }

    pub fn is_deterministic(&self) -> bool {
        self.densities.iter().all(|&d| d == 0.0 || d == 1.0)
    }

    pub fn with_l_cut(&self, l_cut: Option<u64>) -> Self {
        Self { l_cut, ..self.clone() }
    }

    pub fn density(&self, x: i64) -> f64 {
        if x > 0 {
            return 0.0;
        }
        if x == 0 {
            return 1.0;
        }
        if let Some(l) = self.l_cut {
            if x < -(l as i64) {
                return 0.0;
            }
        }
        let m = self.densities.len() as i64;
        self.densities[((-x - 1) % m) as usize]
    }

    fn max_density(&self) -> f64 {
        self.densities.iter().cloned().fold(0.0, f64::max)
    }

    /// Leftmost site with positive density, if the profile is finite.
    pub fn leftmost(&self) -> Option<i64> {
        self.l_cut.map(|l| -(l as i64))
    }
}

/// Smallest |c| with c ≤ 0 such that Σ_{i<c} ρ_i P_0(ξ_t > z − i) < eps.
///
/// The tail is bounded by Σ_{w ≥ w₁} e^{−λw + tκ(λ)} = e^{−λw₁ + tκ(λ)}/(1 − e^{−λ})
/// with w₁ = ⌊z⌋ − c + 2 and λ = w₁/(σ²t), the Chernoff point for w₁.
pub fn required_left_cut(
    profile: &StepProfile,
    kernel: &JumpKernel,
    t: f64,
    z: f64,
    eps: f64,
) -> Result<i64, ProfileError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ProfileError::InvalidArgument(format!("time must be positive, got {t}")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(ProfileError::InvalidArgument(format!("threshold must be positive, got {z}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ProfileError::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let floor = profile.leftmost().unwrap_or(i64::MIN);
    let rho = profile.max_density();
    let limit = kernel.sigma2() * kernel.theta() * t;
    let base = z.floor() as i64 + 2;
    let mut c = 0i64;
    loop {
        if c <= floor {
            return Ok(floor);
        }
        let w1 = (base - c) as f64;
        if w1 > limit {
            let bound = if w1 > 0.0 { f64::INFINITY } else { rho };
            return Err(ProfileError::ChernoffRangeExceeded { depth: c, bound, eps });
        }
        let lambda = w1 / (kernel.sigma2() * t);
        let log_tail = walk::chernoff_log_tail(kernel, t, w1)?;
        let bound = rho * log_tail.exp() / (-(-lambda).exp_m1());
        if bound < eps {
            return Ok(c);
        }
        c -= 1;
    }
}

/// [`required_left_cut`] for any real threshold.
///
/// For z ≤ 0 the threshold and the cut are shifted right by the same
/// amount; the bound only uses the largest density, so the sum it
/// controls is unchanged.
pub fn left_cut(profile: &StepProfile, kernel: &JumpKernel, t: f64, z: f64, eps: f64) -> Result<i64, ProfileError> {
    if z > 0.0 {
        return required_left_cut(profile, kernel, t, z, eps);
    }
    if !z.is_finite() {
        return Err(ProfileError::InvalidArgument(format!("threshold must be finite, got {z}")));
    }
    let shift = 1 - z.floor() as i64;
    let shifted = profile.with_l_cut(profile.l_cut().map(|l| l + shift as u64));
    let c = required_left_cut(&shifted, kernel, t, z + shift as f64, eps)?;
    Ok((c - shift).max(profile.leftmost().unwrap_or(i64::MIN)))
}

/// Left cut from the Chernoff bound at the fixed radius λ = θ:
/// Σ_{w ≥ w₁} e^{−θw + tκ(θ)} = e^{−θw₁ + tκ(θ)}/(1 − e^{−θ}) with
/// w₁ = ⌊z⌋ − c + 2. Coarser than [`left_cut`] but defined for every
/// t > 0 and real z.
pub fn radius_left_cut(
    profile: &StepProfile,
    kernel: &JumpKernel,
    t: f64,
    z: f64,
    eps: f64,
) -> Result<i64, ProfileError> {
    if !(t > 0.0 && t.is_finite() && z.is_finite()) {
        return Err(ProfileError::InvalidArgument(format!("need t > 0 and finite z, got t = {t}, z = {z}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ProfileError::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let theta = kernel.theta();
    let log_budget = (eps * -(-theta).exp_m1() / profile.max_density().max(f64::MIN_POSITIVE)).ln();
    let w1 = ((t * kernel.cumulant(theta) - log_budget) / theta).floor().max(0.0) as i64 + 1;
    let c = (z.floor() as i64 + 2 - w1).min(0);
    Ok(c.max(profile.leftmost().unwrap_or(i64::MIN)))
}

/// Finite set of occupied sites at a given time.
///
/// With `filled_left` every site below `left_boundary` is also occupied;
/// this represents the full-step profile exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    occupied: Vec<i64>,
    pub time: f64,
    left_boundary: i64,
    filled_left: bool,
}

impl Configuration {
    pub fn new(occupied: Vec<i64>, time: f64, left_boundary: i64) -> Result<Self, ProfileError> {
        if occupied.windows(2).any(|w| w[0] >= w[1]) || occupied.first().is_some_and(|&s| s < left_boundary) {
            return Err(ProfileError::InvalidConfiguration);
        }
        Ok(Self {
            occupied,
            time,
            left_boundary,
            filled_left: false,
        })
    }

    pub(crate) fn from_parts(occupied: Vec<i64>, time: f64, left_boundary: i64, filled_left: bool) -> Self {
        debug_assert!(occupied.windows(2).all(|w| w[0] < w[1]));
        Self {
            occupied,
            time,
            left_boundary,
            filled_left,
        }
    }

    /// Full step: every site ≤ 0 occupied, stored implicitly.
    pub fn full_step() -> Self {
        Self::from_parts(vec![0], 0.0, 0, true)
    }

    pub fn occupied(&self) -> &[i64] {
        &self.occupied
    }

    pub fn left_boundary(&self) -> i64 {
        self.left_boundary
    }

    pub fn filled_left(&self) -> bool {
        self.filled_left
    }

    /// Number of explicitly stored particles.
    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty() && !self.filled_left
    }

    pub fn is_occupied(&self, x: i64) -> bool {
        (self.filled_left && x < self.left_boundary) || self.occupied.binary_search(&x).is_ok()
    }

    /// X_t, the right-most particle.
    pub fn rightmost(&self) -> Option<i64> {
        self.occupied
            .last()
            .copied()
            .or((self.filled_left).then(|| self.left_boundary - 1))
    }

    /// X_t^(0), …, X_t^(m), strictly decreasing; shorter if fewer particles exist.
    pub fn order_stats(&self, m: usize) -> Vec<i64> {
        let mut out: Vec<i64> = self.occupied.iter().rev().take(m + 1).copied().collect();
        if self.filled_left {
            let mut next = self.left_boundary - 1;
            while out.len() <= m {
                out.push(next);
                next -= 1;
            }
        }
        out
    }

    /// N(z) = #{occupied k > z}.
    pub fn count_above(&self, z: f64) -> u64 {
        if self.filled_left && z < self.left_boundary as f64 - 1.0 {
            return u64::MAX;
        }
        let k = self.occupied.partition_point(|&s| (s as f64) <= z);
        (self.occupied.len() - k) as u64
    }
}

/// Independent Bernoulli(ρ_x) occupation on [cut, 0] with site 0 occupied.
pub fn sample_initial<R: Rng + ?Sized>(profile: &StepProfile, cut: i64, rng: &mut R) -> Configuration {
    let cut = cut.min(0);
    let lo = profile.leftmost().map_or(cut, |l| l.max(cut));
    let mut occupied = Vec::with_capacity((1 - lo) as usize);
    for x in lo..0 {
        let rho = profile.density(x);
        if rho >= 1.0 || (rho > 0.0 && rng.random::<f64>() < rho) {
            occupied.push(x);
        }
    }
    occupied.push(0);
    Configuration::from_parts(occupied, 0.0, cut, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, subsystem};

    #[test]
    fn construction_examples() {
        let full = make_profile(&[1.0], None).unwrap();
        assert_eq!(full.period(), 1);
        assert_eq!(full.rho_bar(), 1.0);
        assert!(full.is_full_step());
        let alt = make_profile(&[1.0, 0.0], None).unwrap();
        assert_eq!(alt.period(), 2);
        assert_eq!(alt.rho_bar(), 0.5);
        assert_eq!(make_profile(&[0.0, 0.0], None), Err(ProfileError::AllZeroDensities));
        assert!(matches!(
            make_profile(&[1.2], None),
            Err(ProfileError::DensityOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn density_is_periodic_and_truncated() {
        let p = make_profile(&[0.2, 0.7, 0.4], Some(5)).unwrap();
        assert_eq!(p.density(1), 0.0);
        assert_eq!(p.density(0), 1.0);
        assert_eq!(p.density(-1), 0.2);
        assert_eq!(p.density(-3), 0.4);
        assert_eq!(p.density(-4), 0.2);
        assert_eq!(p.density(-5), 0.7);
        assert_eq!(p.density(-6), 0.0);
    }

    #[test]
    fn deterministic_samples() {
        let full = StepProfile::full_step();
        let alt = make_profile(&[0.0, 1.0], None).unwrap();
        for seed in 0..5 {
            let mut rng = stream(seed, 0, subsystem::INITIAL);
            assert_eq!(sample_initial(&full, -5, &mut rng).occupied(), &[-5, -4, -3, -2, -1, 0]);
            assert_eq!(sample_initial(&alt, -4, &mut rng).occupied(), &[-4, -2, 0]);
        }
        let other = make_profile(&[1.0, 0.0], None).unwrap();
        let mut rng = stream(0, 0, subsystem::INITIAL);
        assert_eq!(sample_initial(&other, -4, &mut rng).occupied(), &[-3, -1, 0]);
    }

    #[test]
    fn cut_respects_l_cut() {
        let k = JumpKernel::nearest_neighbor();
        let p = make_profile(&[1.0], Some(3)).unwrap();
        assert_eq!(required_left_cut(&p, &k, 100.0, 30.0, 1e-6).unwrap(), -3);
        let free = required_left_cut(&StepProfile::full_step(), &k, 100.0, 30.0, 1e-6).unwrap();
        assert!(free < -3);
    }

    #[test]
    fn cut_shrinks_with_budget() {
        let k = JumpKernel::nearest_neighbor();
        let p = StepProfile::full_step();
        let mut last = i64::MIN;
        for eps in [1e-9, 1e-6, 1e-3, 0.1] {
            let c = required_left_cut(&p, &k, 100.0, 30.0, eps).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn order_stats_and_counts() {
        let c = Configuration::new(vec![-7, -3, 2, 5], 1.0, -10).unwrap();
        assert_eq!(c.rightmost(), Some(5));
        assert_eq!(c.order_stats(2), vec![5, 2, -3]);
        assert_eq!(c.count_above(2.0), 1);
        assert_eq!(c.count_above(1.5), 2);
        assert!(Configuration::new(vec![1, 1], 0.0, 0).is_err());
        let f = Configuration::full_step();
        assert_eq!(f.order_stats(2), vec![0, -1, -2]);
        assert_eq!(f.count_above(-0.5), 1);
    }
}
