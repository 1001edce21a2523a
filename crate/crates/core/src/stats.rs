//! Empirical distributions and the tests that confront samples with
//! predictions.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, subsystem};
use crate::sim::SiteSnapshot;
use crate::theory::poisson_pmf;

/// Bootstrap resamples used by every bootstrap procedure here.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample of size {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("snapshots do not share a window covering the threshold: {0}")]
    WindowMismatch(String),
    #[error("{0}")]
    InvalidInput(String),
}

/// Sorted sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    values: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::SampleTooSmall { n: 0, min: 1 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn from_ints(values: impl IntoIterator<Item = i64>) -> Result<Self, StatsError> {
        Self::new(values.into_iter().map(|v| v as f64).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// F̂(x) = #{v ≤ x}/n.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.n() as f64
    }

    /// F̂(x−) = #{v < x}/n.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v < x) as f64 / self.n() as f64
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Distinct values with F̂ just below and at each.
    fn steps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.n() as f64;
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= self.values.len() {
                return None;
            }
            let v = self.values[i];
            let below = i as f64 / n;
            while i < self.values.len() && self.values[i] == v {
                i += 1;
            }
            Some((v, below, i as f64 / n))
        })
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

/// sup_x |F̂(x) − F(x)| for a continuous F.
pub fn ks_distance(emp: &EmpiricalDist, cdf: impl Fn(f64) -> f64) -> f64 {
    emp.steps()
        .map(|(v, below, at)| {
            let f = cdf(v);
            (at - f).abs().max((below - f).abs())
        })
        .fold(0.0, f64::max)
}

/// sup_x |F̂(x) − F(x)| for an F supported on the integers.
///
/// Between atoms F̂ is flat and so is F, so the supremum is attained at the
/// sample values and at the integers just below them.
pub fn ks_distance_lattice(emp: &EmpiricalDist, cdf: impl Fn(i64) -> f64) -> f64 {
    emp.steps()
        .map(|(v, below, at)| {
            let v = v.round() as i64;
            (at - cdf(v)).abs().max((below - cdf(v - 1)).abs())
        })
        .fold(0.0, f64::max)
}

/// √(ln(2/α)/(2n)).
pub fn dkw_band(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Asymptotic two-sample KS critical value c(α)·√((n+m)/(nm)).
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn ks_two_sample_distance(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    let mut d: f64 = 0.0;
    for &v in a.values().iter().chain(b.values()) {
        d = d.max((a.cdf(v) - b.cdf(v)).abs());
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KsDkw,
    KsTwoSample,
    Dispersion,
    PoissonTv,
    PmfTv,
    Trend,
    BoundedRatio,
    CovarianceSign,
    MeanCi,
    Exact,
    Bound,
}

/// Outcome of one statistical comparison; `pass` iff `statistic ≤ threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: usize,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestReport {
    pub fn new(method: Method, statistic: f64, threshold: f64, n: usize, confidence: f64) -> Self {
        Self {
            method,
            statistic,
            threshold,
            pass: statistic <= threshold,
            n,
            confidence,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

/// KS distance against a continuous CDF, judged against the DKW band.
pub fn ks_test(emp: &EmpiricalDist, cdf: impl Fn(f64) -> f64, alpha: f64) -> TestReport {
    TestReport::new(Method::KsDkw, ks_distance(emp, cdf), dkw_band(emp.n(), alpha), emp.n(), 1.0 - alpha)
}

/// KS distance against a lattice CDF, judged against the DKW band.
pub fn ks_test_lattice(emp: &EmpiricalDist, cdf: impl Fn(i64) -> f64, alpha: f64) -> TestReport {
    TestReport::new(
        Method::KsDkw,
        ks_distance_lattice(emp, cdf),
        dkw_band(emp.n(), alpha),
        emp.n(),
        1.0 - alpha,
    )
}

pub fn ks_two_sample(a: &EmpiricalDist, b: &EmpiricalDist, alpha: f64) -> TestReport {
    TestReport::new(
        Method::KsTwoSample,
        ks_two_sample_distance(a, b),
        ks_two_sample_critical(a.n(), b.n(), alpha),
        a.n() + b.n(),
        1.0 - alpha,
    )
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Minimum sample size for [`dispersion_report`].
pub const DISPERSION_MIN_N: usize = 100;

/// One-sided test of Var(N) ≤ E[N].
///
/// The statistic is the 1% bootstrap quantile of Var − mean; the
/// inequality is rejected, and the report fails, only when that lower
/// bound is positive.
pub fn dispersion_report(counts: &[u64], seed: u64) -> Result<TestReport, StatsError> {
    if counts.len() < DISPERSION_MIN_N {
        return Err(StatsError::SampleTooSmall {
            n: counts.len(),
            min: DISPERSION_MIN_N,
        });
    }
    let n = counts.len();
    let excess = |sample: &mut dyn Iterator<Item = u64>| {
        let (mut s, mut s2) = (0.0, 0.0);
        for c in sample {
            let c = c as f64;
            s += c;
            s2 += c * c;
        }
        let m = s / n as f64;
        let var = (s2 - n as f64 * m * m) / (n as f64 - 1.0);
        var - m
    };
    let observed = excess(&mut counts.iter().copied());
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b, subsystem::BOOTSTRAP);
            excess(&mut (0..n).map(|_| counts[rng.random_range(0..n)]))
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let lower = quantile(&boot, 0.01);
    Ok(TestReport::new(Method::Dispersion, lower, 0.0, n, 0.99)
        .with_note(format!("Var − mean = {observed:.6}")))
}

/// ½ Σ_k |p̂(k) − Pois_λ(k)|, including the Poisson mass beyond the sample.
pub fn poisson_tv(counts: &[u64], lambda: f64) -> f64 {
    pmf_tv(counts, |k| poisson_pmf(k, lambda))
}

/// ½ Σ_k |p̂(k) − p(k)| for a pmf on the nonnegative integers; the mass of
/// `pmf` beyond the largest observation counts in full.
pub fn pmf_tv(counts: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; max + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    let n = counts.len() as f64;
    let mut within = 0.0;
    let mut mass = 0.0;
    for (k, &h) in hist.iter().enumerate() {
        let p = pmf(k as u64);
        mass += p;
        within += (h as f64 / n - p).abs();
    }
    (0.5 * (within + (1.0 - mass).max(0.0))).min(1.0)
}

/// Total variation to a tabulated pmf, with a parametric-bootstrap 99%
/// noise level added to `tolerance` as the threshold.
pub fn pmf_fit(counts: &[u64], pmf: &[f64], tolerance: f64, seed: u64) -> Result<TestReport, StatsError> {
    if counts.is_empty() {
        return Err(StatsError::SampleTooSmall { n: 0, min: 1 });
    }
    let law = WeightedAliasIndex::new(pmf.to_vec())
        .map_err(|e| StatsError::InvalidInput(format!("pmf is not a valid weight vector: {e}")))?;
    let n = counts.len();
    let at = |k: u64| pmf.get(k as usize).copied().unwrap_or(0.0);
    let tv = pmf_tv(counts, at);
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b, subsystem::BOOTSTRAP);
            let sample: Vec<u64> = (0..n).map(|_| law.sample(&mut rng) as u64).collect();
            pmf_tv(&sample, at)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    Ok(TestReport::new(Method::PmfTv, tv, tolerance + quantile(&boot, 0.99), n, 0.99))
}

/// Total variation to Poisson(λ) with a parametric-bootstrap 99% threshold.
pub fn poisson_fit(counts: &[u64], lambda: f64, seed: u64) -> Result<TestReport, StatsError> {
    if counts.is_empty() {
        return Err(StatsError::SampleTooSmall { n: 0, min: 1 });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(StatsError::InvalidInput(format!("λ must be positive, got {lambda}")));
    }
    let n = counts.len();
    let tv = poisson_tv(counts, lambda);
    let law = Poisson::new(lambda).expect("positive rate");
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b, subsystem::BOOTSTRAP);
            let sample: Vec<u64> = (0..n).map(|_| law.sample(&mut rng) as u64).collect();
            poisson_tv(&sample, lambda)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    Ok(TestReport::new(Method::PoissonTv, tv, quantile(&boot, 0.99), n, 0.99))
}

/// Plug-in estimate of −Σ_{j≠k>z} Cov(η(j), η(k)) with a bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovSum {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl CovSum {
    /// Passes unless the whole interval lies below zero.
    pub fn nonnegativity_report(&self) -> TestReport {
        TestReport::new(Method::CovarianceSign, -self.ci_high, 0.0, self.n, 0.99)
            .with_note(format!("estimate {:.6} in [{:.6}, {:.6}]", self.estimate, self.ci_low, self.ci_high))
    }

    /// Passes unless the whole interval lies above `bound`.
    pub fn bound_report(&self, bound: f64) -> TestReport {
        TestReport::new(Method::Bound, self.ci_low, bound, self.n, 0.99)
    }
}

/// Minimum number of snapshots for [`empirical_cov_sum`].
pub const COV_SUM_MIN_N: usize = 1000;

/// Σ_k Var(η(k)) − Var(Σ_k η(k)) over sites k > z, with a 99% bootstrap interval.
pub fn empirical_cov_sum(snapshots: &[SiteSnapshot], z: f64, seed: u64) -> Result<CovSum, StatsError> {
    let n = snapshots.len();
    if n < COV_SUM_MIN_N {
        return Err(StatsError::SampleTooSmall { n, min: COV_SUM_MIN_N });
    }
    let (lo, hi) = (snapshots[0].lo, snapshots[0].hi);
    if snapshots.iter().any(|s| s.lo != lo || s.hi != hi) {
        return Err(StatsError::WindowMismatch("windows differ between snapshots".into()));
    }
    let first = z.floor() as i64 + 1;
    if lo > first {
        return Err(StatsError::WindowMismatch(format!(
            "window starts at {lo}, above the first site {first} beyond z"
        )));
    }
    let width = (hi - first + 1).max(0) as usize;
    // Occupied sites above z, per snapshot.
    let sparse: Vec<Vec<u32>> = snapshots
        .iter()
        .map(|s| (first..=hi).filter(|&x| s.get(x)).map(|x| (x - first) as u32).collect())
        .collect();
    let estimate = |pick: &mut dyn Iterator<Item = usize>| {
        let mut freq = vec![0u64; width];
        let (mut s, mut s2) = (0.0, 0.0);
        for i in pick {
            let sites = &sparse[i];
            for &k in sites {
                freq[k as usize] += 1;
            }
            let c = sites.len() as f64;
            s += c;
            s2 += c * c;
        }
        let nf = n as f64;
        let m = s / nf;
        let var_n = (s2 - nf * m * m) / (nf - 1.0);
        let var_sites: f64 = freq
            .iter()
            .map(|&f| {
                let p = f as f64 / nf;
                p * (1.0 - p) * nf / (nf - 1.0)
            })
            .sum();
        var_sites - var_n
    };
    let point = estimate(&mut (0..n));
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b, subsystem::BOOTSTRAP);
            estimate(&mut (0..n).map(|_| rng.random_range(0..n)))
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    Ok(CovSum {
        estimate: point,
        ci_low: quantile(&boot, 0.005),
        ci_high: quantile(&boot, 0.995),
        n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TrendMode {
    /// Metric strictly decreasing across consecutive points.
    Decreasing,
    /// max/min of the metric at most `factor`.
    BoundedRatio { factor: f64 },
}

/// Default factor for bounded-ratio trend checks.
pub const DEFAULT_RATIO_FACTOR: f64 = 5.0;

/// Trend check over `(t, metric)` points with strictly increasing t.
pub fn trend_report(values: &[(f64, f64)], mode: TrendMode) -> Result<TestReport, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::SampleTooSmall { n: values.len(), min: 2 });
    }
    if values.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(StatsError::InvalidInput("t must be strictly increasing".into()));
    }
    if values.iter().any(|(_, m)| !m.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = values.len();
    let listing = values
        .iter()
        .map(|(t, m)| format!("{t:e}:{m:.6e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(match mode {
        TrendMode::Decreasing => {
            let violations = values.windows(2).filter(|w| w[1].1 >= w[0].1).count();
            TestReport::new(Method::Trend, violations as f64, 0.0, n, 1.0).with_note(listing)
        }
        TrendMode::BoundedRatio { factor } => {
            let max = values.iter().map(|v| v.1).fold(f64::MIN, f64::max);
            let min = values.iter().map(|v| v.1).fold(f64::MAX, f64::min);
            let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
            TestReport::new(Method::BoundedRatio, ratio, factor, n, 1.0).with_note(listing)
        }
    })
}

/// |observed − expected| against `sigmas` standard errors.
pub fn mean_within(values: &[f64], expected: f64, sigmas: f64) -> TestReport {
    let se = std_error(values);
    TestReport::new(Method::MeanCi, (mean(values) - expected).abs(), sigmas * se, values.len(), 0.997)
        .with_note(format!("mean {:.6}, expected {expected:.6}", mean(values)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_at_median() {
        let emp = EmpiricalDist::new(vec![0.0]).unwrap();
        let d = ks_distance(&emp, |x| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2));
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dkw_band_value() {
        assert!((dkw_band(20_000, 0.01) - 0.011509).abs() < 1e-6);
        assert!((ks_two_sample_critical(5000, 5000, 0.01) - 1.6276 * (2.0f64 / 5000.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn ks_invariant_under_monotone_map() {
        let vals = vec![0.1, 0.5, 0.5, 0.9, 1.7];
        let emp = EmpiricalDist::new(vals.clone()).unwrap();
        let f = |x: f64| (x / 2.0).clamp(0.0, 1.0);
        let emp2 = EmpiricalDist::new(vals.iter().map(|v| v.powi(3) + 2.0).collect()).unwrap();
        let g = |y: f64| f((y - 2.0).cbrt());
        assert!((ks_distance(&emp, f) - ks_distance(&emp2, g)).abs() < 1e-12);
    }

    #[test]
    fn all_zero_counts_against_poisson_one() {
        let counts = vec![0u64; 500];
        let tv = poisson_tv(&counts, 1.0);
        assert!((tv - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!(!poisson_fit(&counts, 1.0, 3).unwrap().pass);
    }

    #[test]
    fn constant_counts_are_underdispersed() {
        let r = dispersion_report(&vec![3u64; 200], 1).unwrap();
        assert!(r.pass);
        assert!(matches!(dispersion_report(&[1, 2], 1), Err(StatsError::SampleTooSmall { .. })));
    }

    #[test]
    fn trend_examples() {
        let pass = trend_report(&[(1.0, 3.0), (10.0, 2.0), (100.0, 1.0)], TrendMode::Decreasing).unwrap();
        assert!(pass.pass);
        let fail = trend_report(&[(1.0, 1.0), (10.0, 2.0)], TrendMode::Decreasing).unwrap();
        assert!(!fail.pass);
        let ratio = trend_report(&[(1e2, 2.0), (1e3, 9.0)], TrendMode::BoundedRatio { factor: 5.0 }).unwrap();
        assert!(ratio.pass);
        let ratio = trend_report(&[(1e2, 1.0), (1e3, 9.0)], TrendMode::BoundedRatio { factor: 5.0 }).unwrap();
        assert!(!ratio.pass);
    }

    #[test]
    fn report_round_trips_as_json() {
        let r = TestReport::new(Method::KsDkw, 0.01, 0.0163, 20_000, 0.99);
        let back: TestReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(r, back);
        assert!(back.pass);
    }
}
