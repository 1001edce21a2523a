use seplab_core::profile::{self, left_cut, required_left_cut, sample_initial, StepProfile};
use seplab_core::rng::{stream, subsystem};
use seplab_core::walk::{self, JumpKernel, ORACLE_EPS};

/// Σ_{i<c} ρ_i P_0(ξ_t > z − i), summed from a table wide enough that the
/// omitted terms are below 1e-300.
fn dropped_mass(profile: &StepProfile, kernel: &JumpKernel, t: f64, z: f64, c: i64) -> f64 {
    let table = walk::transition_pmf(kernel, t, 1e-13).unwrap();
    let tails = table.tails();
    let deepest = (z.floor() as i64 + 1) - table.half_width();
    let lo = profile.leftmost().map_or(deepest, |l| l.max(deepest));
    (lo..c).map(|i| profile.density(i) * tails.above(z - i as f64)).sum()
}

#[test]
fn certified_cut_resummed_with_exact_tails() {
    let eps = 1e-6;
    let cases = [
        (StepProfile::full_step(), JumpKernel::nearest_neighbor(), 100.0, 30.0),
        (StepProfile::new(&[1.0, 0.0], None).unwrap(), JumpKernel::nearest_neighbor(), 100.0, 30.0),
        (
            StepProfile::new(&[0.3, 0.9, 0.5], None).unwrap(),
            JumpKernel::new(&[(1, 0.25), (2, 0.25)], 1.0).unwrap(),
            60.0,
            12.5,
        ),
    ];
    for (p, k, t, z) in cases {
        let c = required_left_cut(&p, &k, t, z, eps).unwrap();
        assert!(c < 0);
        let dropped = dropped_mass(&p, &k, t, z, c);
        assert!(dropped < eps, "c={c} dropped={dropped}");
    }
}

#[test]
fn cut_for_nonpositive_thresholds() {
    let p = StepProfile::full_step();
    let k = JumpKernel::nearest_neighbor();
    for z in [0.0, -7.5, -20.0] {
        let c = left_cut(&p, &k, 100.0, z, 1e-6).unwrap();
        assert!(dropped_mass(&p, &k, 100.0, z, c) < 1e-6, "z={z}");
    }
    assert!(left_cut(&p, &k, 100.0, -20.0, 1e-6).unwrap() < left_cut(&p, &k, 100.0, 1.0, 1e-6).unwrap());
}

#[test]
fn truncated_profile_cut_never_below_l() {
    let p = StepProfile::new(&[1.0], Some(7)).unwrap();
    let k = JumpKernel::nearest_neighbor();
    assert_eq!(required_left_cut(&p, &k, 100.0, 30.0, 1e-6).unwrap(), -7);
    assert_eq!(left_cut(&p, &k, 100.0, -3.0, 1e-6).unwrap(), -7);
}

#[test]
fn chernoff_window_exhaustion_is_reported() {
    let p = StepProfile::full_step();
    let k = JumpKernel::nearest_neighbor();
    let err = required_left_cut(&p, &k, 1.0, 0.5, 1e-300).unwrap_err();
    assert!(matches!(err, profile::ProfileError::ChernoffRangeExceeded { .. }), "{err:?}");
}

#[test]
fn occupancy_frequencies_match_densities() {
    let p = StepProfile::new(&[0.5, 0.2, 0.9], None).unwrap();
    let n = 10_000;
    let cut = -30;
    let mut hits = [0u32; 31];
    for r in 0..n {
        let mut rng = stream(17, r, subsystem::INITIAL);
        let c = sample_initial(&p, cut, &mut rng);
        assert!(c.is_occupied(0));
        for &x in c.occupied() {
            hits[(x - cut) as usize] += 1;
        }
    }
    // Hoeffding band at 99% per site, Bonferroni over 30 sites.
    let band = ((2.0 * 30.0 / 0.01f64).ln() / (2.0 * n as f64)).sqrt();
    for x in cut..0 {
        let freq = hits[(x - cut) as usize] as f64 / n as f64;
        assert!((freq - p.density(x)).abs() < band, "x={x} freq={freq} rho={}", p.density(x));
    }
}

#[test]
fn half_density_mean_occupancy() {
    let p = StepProfile::new(&[0.5], None).unwrap();
    let n = 2000u64;
    let sites = 50;
    let mut total = 0usize;
    for r in 0..n {
        let mut rng = stream(3, r, subsystem::INITIAL);
        total += sample_initial(&p, -sites, &mut rng).len() - 1;
    }
    let m = (n * sites as u64) as f64;
    let freq = total as f64 / m;
    assert!((freq - 0.5).abs() < 3.0 * (0.25 / m).sqrt(), "{freq}");
}

#[test]
fn deterministic_profiles_ignore_the_seed() {
    let p = StepProfile::new(&[1.0, 0.0, 1.0], None).unwrap();
    let a = sample_initial(&p, -12, &mut stream(1, 0, subsystem::INITIAL));
    let b = sample_initial(&p, -12, &mut stream(99, 5, subsystem::INITIAL));
    assert_eq!(a, b);
    let full = sample_initial(&StepProfile::full_step(), -5, &mut stream(4, 4, subsystem::INITIAL));
    assert_eq!(full.occupied(), &[-5, -4, -3, -2, -1, 0]);
}

#[test]
fn tail_sum_uses_real_thresholds_strictly() {
    let k = JumpKernel::nearest_neighbor();
    let t = walk::transition_pmf(&k, 9.0, ORACLE_EPS).unwrap().tails();
    // ξ > 2.5 and ξ > 2 both mean ξ ≥ 3.
    assert_eq!(t.above(2.5), t.above(2.0));
    assert!(t.above(1.999) > t.above(2.0));
}
