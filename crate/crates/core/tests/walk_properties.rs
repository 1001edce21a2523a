use proptest::prelude::*;
use seplab_core::normal;
use seplab_core::walk::{self, JumpKernel, ORACLE_EPS};

fn kernels() -> Vec<JumpKernel> {
    vec![
        JumpKernel::nearest_neighbor(),
        JumpKernel::new(&[(1, 0.25), (2, 0.25)], 1.0).unwrap(),
        JumpKernel::new(&[(1, 0.3), (3, 0.15), (4, 0.05)], 0.5).unwrap(),
    ]
}

fn max_over_min(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

#[test]
fn mass_and_symmetry_up_to_fifty() {
    for k in kernels() {
        for &t in &[0.3, 1.0, 5.0, 17.0, 50.0] {
            let table = walk::transition_pmf(&k, t, ORACLE_EPS).unwrap();
            let mass = table.mass();
            assert!((1.0 - ORACLE_EPS..=1.0 + 1e-14).contains(&mass), "t={t} mass={mass}");
            for x in 0..=table.half_width() {
                assert!((table.prob(x) - table.prob(-x)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn chapman_kolmogorov_pairs() {
    for k in kernels() {
        for &(t1, t2) in &[(1.0, 1.0), (2.0, 3.0)] {
            let a = walk::transition_pmf(&k, t1, ORACLE_EPS).unwrap();
            let b = walk::transition_pmf(&k, t2, ORACLE_EPS).unwrap();
            let c = walk::transition_pmf(&k, t1 + t2, ORACLE_EPS).unwrap();
            assert!(a.convolve(&b).total_variation(&c) <= 3.0 * ORACLE_EPS);
        }
    }
}

#[test]
fn chernoff_bounds_the_tail() {
    for k in kernels() {
        for &t in &[10.0, 100.0] {
            let table = walk::transition_pmf_on(&k, t, (k.sigma2() * k.theta() * t) as usize + 8).unwrap();
    
            let tails = table.tails();
            let top = (k.sigma2() * k.theta() * t).floor() as i64;
            for x in 0..=top {
                let bound = walk::chernoff_log_tail(&k, t, x as f64).unwrap();
                let tail = tails.above(x as f64 - 1.0);
                assert!(bound >= tail.ln() - 1e-9, "t={t} x={x} bound={bound} log tail={}", tail.ln());
            }
        }
    }
}

#[test]
fn shift_distance_scales_like_y_over_root_t() {
    let k = JumpKernel::nearest_neighbor();
    let mut ratios = Vec::new();
    for &t in &[10.0, 100.0, 1000.0] {
        for &y in &[1i64, 2, 5] {
            let d = walk::pmf_shift_distance(&k, t, y, ORACLE_EPS).unwrap();
            ratios.push(d * f64::sqrt(t) / y as f64);
        }
    }
    assert!(max_over_min(&ratios) <= 5.0, "{ratios:?}");
}

#[test]
fn gradient_residual_scales_like_inverse_t_squared() {
    for k in kernels() {
        let scaled: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&t| walk::grad_residual_distance(&k, t, 1, ORACLE_EPS).unwrap() * t * t)
            .collect();
        assert!(max_over_min(&scaled) <= 5.0, "{scaled:?}");
    }
}

#[test]
fn mean_excess_expansion_constant() {
    let mut k_fit: f64 = 0.0;
    let mut u = 2.0;
    while u <= 8.0 {
        let f = walk::gaussian_mean_excess(u);
        let phi = normal::density(u);
        k_fit = k_fit.max((f - phi / (u * u)).abs() / (phi / u.powi(4)));
        u += 0.25;
    }
    assert!(k_fit <= 3.0, "fitted K = {k_fit}");
}

#[test]
fn normal_tail_ratio_error_decays_like_inverse_root_t() {
    // σ·x·√t is an integer at every t here, so the lattice offset is the same.
    let k = JumpKernel::nearest_neighbor();
    let ts = [1e2, 1e4, 1e6];
    let errs: Vec<f64> = ts
        .iter()
        .map(|&t| walk::normal_tail_ratio_error(&k, t, 1.0).unwrap())
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[1] < errs[0] * 10.0);
    let scaled: Vec<f64> = errs.iter().zip(ts).map(|(e, t)| e * t.sqrt()).collect();
    assert!(max_over_min(&scaled) <= 5.0, "{scaled:?}");
    assert!((normal::upper_tail(1.0) - 0.15866).abs() < 5e-6);
}

#[test]
fn normal_tail_ratio_error_off_lattice_grid() {
    // At t = 10³ the threshold 31.62 sits between lattice points and the
    // error dips below the t = 10⁴ value; only the overall decay holds.
    let k = JumpKernel::nearest_neighbor();
    let errs: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&t| walk::normal_tail_ratio_error(&k, t, 1.0).unwrap())
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[0], "{errs:?}");
}

#[test]
fn local_clt_window_covers_bulk() {
    let k = JumpKernel::nearest_neighbor();
    let t = 400.0;
    let w = walk::local_clt_window(&k, t).floor() as i64;
    let table = walk::transition_pmf(&k, t, ORACLE_EPS).unwrap();
    let worst = (-w..=w)
        .map(|x| (table.prob(x) - walk::local_clt_density(&k, t, x)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1.0 / t);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_kernels_are_symmetric_with_full_mass(
        weights in prop::collection::vec(0.01f64..1.0, 1..5),
        t in 0.1f64..40.0,
    ) {
        let total: f64 = weights.iter().sum();
        let pairs: Vec<(i64, f64)> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| (i as i64 + 1, 0.5 * w / total))
            .collect();
        let k = JumpKernel::new(&pairs, 0.5).unwrap();
        let table = walk::transition_pmf(&k, t, 1e-9).unwrap();
        prop_assert!(table.mass() >= 1.0 - 1e-9);
        prop_assert!(table.mass() <= 1.0 + 1e-14);
        for x in 0..=table.half_width() {
            prop_assert!((table.prob(x) - table.prob(-x)).abs() <= 1e-12);
        }

    
    }
}
