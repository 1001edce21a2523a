use rand_distr::{Bernoulli, Distribution, Gamma, Normal, Poisson};
use statrs::distribution::{ContinuousCDF, Normal as NormalLaw};

use seplab_core::rng::{stream, subsystem};
use seplab_core::sim::SiteSnapshot;
use seplab_core::stats::{
    dispersion_report, dkw_band, empirical_cov_sum, ks_test, ks_two_sample, mean_within, poisson_fit, poisson_tv,
    pmf_fit, trend_report, EmpiricalDist, StatsError, TrendMode,
};

fn poisson_counts(lambda: f64, n: usize, seed: u64) -> Vec<u64> {
    let law = Poisson::new(lambda).unwrap();
    let mut rng = stream(seed, 0, subsystem::SYNTHETIC);
    (0..n).map(|_| law.sample(&mut rng) as u64).collect()
}

#[test]
fn normal_sample_within_dkw_band() {
    let mut rng = stream(1, 0, subsystem::SYNTHETIC);
    let draw = Normal::new(0.0, 1.0).unwrap();
    let emp = EmpiricalDist::new((0..10_000).map(|_| draw.sample(&mut rng)).collect()).unwrap();
    let law = NormalLaw::new(0.0, 1.0).unwrap();
    let r = ks_test(&emp, |x| law.cdf(x), 0.01);
    assert!(r.pass, "{r:?}");
    assert_eq!(r.threshold, dkw_band(10_000, 0.01));
    let shifted = NormalLaw::new(0.2, 1.0).unwrap();
    assert!(!ks_test(&emp, |x| shifted.cdf(x), 0.01).pass);
}

#[test]
fn two_sample_ks_separates_shifted_laws() {
    let mut rng = stream(2, 0, subsystem::SYNTHETIC);
    let draw = Normal::new(0.0, 1.0).unwrap();
    let mut sample = |shift: f64| EmpiricalDist::new((0..4000).map(|_| draw.sample(&mut rng) + shift).collect()).unwrap();
    let a = sample(0.0);
    let b = sample(0.0);
    let c = sample(0.3);
    assert!(ks_two_sample(&a, &b, 0.01).pass);
    assert!(!ks_two_sample(&a, &c, 0.01).pass);
}

#[test]
fn poisson_counts_pass_dispersion() {
    let counts = poisson_counts(2.0, 5000, 3);
    let r = dispersion_report(&counts, 4).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn overdispersed_counts_fail_dispersion() {
    // Gamma–Poisson mixture with mean 3 and variance 6.
    let mix = Gamma::new(3.0, 1.0).unwrap();
    let mut rng = stream(5, 0, subsystem::SYNTHETIC);
    let counts: Vec<u64> = (0..5000)
        .map(|_| Poisson::new(mix.sample(&mut rng)).unwrap().sample(&mut rng) as u64)
        .collect();
    let r = dispersion_report(&counts, 6).unwrap();
    assert!(!r.pass, "{r:?}");
}

#[test]
fn poisson_fit_accepts_and_rejects() {
    let counts = poisson_counts(1.5, 5000, 7);
    let r = poisson_fit(&counts, 1.5, 8).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(!poisson_fit(&counts, 2.0, 8).unwrap().pass);
}

fn three_point_sample(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = stream(seed, 0, subsystem::SYNTHETIC);
    let u = rand_distr::Uniform::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| match u.sample(&mut rng) {
            v if v < 0.5 => 0,
            v if v < 0.8 => 1,
            _ => 2,
        })
        .collect()
}

#[test]
fn tabulated_pmf_fit_is_calibrated() {
    let pmf = [0.5, 0.3, 0.2];
    // 20 independent samples at level 1%: three or more rejections has
    // probability about 1e-3.
    let rejected = (0..20)
        .filter(|&s| !pmf_fit(&three_point_sample(100 + s, 4000), &pmf, 0.0, s).unwrap().pass)
        .count();
    assert!(rejected <= 2, "{rejected} rejections");
    let counts = three_point_sample(9, 4000);
    assert!(!pmf_fit(&counts, &[0.4, 0.4, 0.2], 0.0, 10).unwrap().pass);
    assert!(pmf_fit(&counts, &[0.4, 0.4, 0.2], 0.2, 10).unwrap().pass);
}

#[test]
fn total_variation_is_a_probability() {
    for lambda in [0.01, 0.5, 3.0, 40.0] {
        for counts in [poisson_counts(1.0, 300, 11), vec![0; 50], vec![100; 10]] {
            let tv = poisson_tv(&counts, lambda);
            assert!((0.0..=1.0).contains(&tv), "{tv}");
        }
    }
    assert!(poisson_tv(&[1000; 5], 0.1) > 0.999);
}

#[test]
fn independent_sites_have_no_covariance() {
    let mut rng = stream(12, 0, subsystem::SYNTHETIC);
    let coin = Bernoulli::new(0.3).unwrap();
    let snaps: Vec<SiteSnapshot> = (0..3000)
        .map(|_| {
            let occupied: Vec<i64> = (0..40).filter(|_| coin.sample(&mut rng)).collect();
            SiteSnapshot::from_sites(0, 39, 1.0, occupied)
        })
        .collect();
    let cov = empirical_cov_sum(&snaps, -0.5, 13).unwrap();
    assert!(cov.ci_low <= 0.0 && 0.0 <= cov.ci_high, "{cov:?}");
    assert!(cov.nonnegativity_report().pass);
}

#[test]
fn anticorrelated_sites_have_positive_sum() {
    // Exactly one of two sites occupied: Cov = −1/4 for each ordered pair.
    let mut rng = stream(14, 0, subsystem::SYNTHETIC);
    let coin = Bernoulli::new(0.5).unwrap();
    let snaps: Vec<SiteSnapshot> = (0..2000)
        .map(|_| SiteSnapshot::from_sites(1, 2, 1.0, [if coin.sample(&mut rng) { 1 } else { 2 }]))
        .collect();
    let cov = empirical_cov_sum(&snaps, 0.0, 15).unwrap();
    assert!(cov.ci_low <= 0.5 && 0.5 <= cov.ci_high, "{cov:?}");
    assert!(cov.bound_report(0.6).pass);
    assert!(!cov.bound_report(0.3).pass);
}

#[test]
fn cov_sum_input_errors() {
    let few = vec![SiteSnapshot::from_sites(0, 5, 1.0, [1]); 10];
    assert!(matches!(empirical_cov_sum(&few, 0.0, 0), Err(StatsError::SampleTooSmall { .. })));
    let mut mixed = vec![SiteSnapshot::from_sites(0, 5, 1.0, [1]); 1000];
    mixed.push(SiteSnapshot::from_sites(0, 6, 1.0, [1]));
    assert!(matches!(empirical_cov_sum(&mixed, 0.0, 0), Err(StatsError::WindowMismatch(_))));
    let late = vec![SiteSnapshot::from_sites(5, 9, 1.0, [6]); 1000];
    assert!(matches!(empirical_cov_sum(&late, 0.0, 0), Err(StatsError::WindowMismatch(_))));
    assert!(matches!(dispersion_report(&[1; 20], 0), Err(StatsError::SampleTooSmall { .. })));
    assert!(matches!(EmpiricalDist::new(vec![1.0, f64::NAN]), Err(StatsError::NonFinite)));
}

#[test]
fn trend_modes() {
    let down = [(1e2, 0.3), (1e3, 0.2), (1e4, 0.1)];
    assert!(trend_report(&down, TrendMode::Decreasing).unwrap().pass);
    let flat = [(1e2, 0.3), (1e3, 0.3)];
    assert!(!trend_report(&flat, TrendMode::Decreasing).unwrap().pass);
    let wide = [(1.0, 1.0), (2.0, 6.0)];
    assert!(!trend_report(&wide, TrendMode::BoundedRatio { factor: 5.0 }).unwrap().pass);
    assert!(trend_report(&wide, TrendMode::BoundedRatio { factor: 6.0 }).unwrap().pass);
    assert!(matches!(
        trend_report(&[(2.0, 1.0), (1.0, 0.5)], TrendMode::Decreasing),
        Err(StatsError::InvalidInput(_))
    ));
}

#[test]
fn mean_band_uses_standard_errors() {
    let values: Vec<f64> = poisson_counts(4.0, 10_000, 16).into_iter().map(|c| c as f64).collect();
    assert!(mean_within(&values, 4.0, 3.0).pass);
    assert!(!mean_within(&values, 4.2, 3.0).pass);
}
