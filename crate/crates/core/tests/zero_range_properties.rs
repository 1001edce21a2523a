use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use seplab_core::rng::{stream, subsystem};
use seplab_core::zero_range::{
    coupled_evolve, default_site_cut, evolve_zr, mu_sum_distribution, replicate_sums, sample_mu, tagged_displacement,
    AsepParams, DominationCheck, ZrConfig, ZrError, ZrStart,
};

type State = Vec<u64>;

fn trimmed(mut s: State) -> State {
    while s.last() == Some(&0) {
        s.pop();
    }
    s
}

/// Outgoing `(rate, target)` pairs of the generator, written out from the
/// jump rules.
fn moves(s: &State, p: f64) -> Vec<(f64, State)> {
    let q = 1.0 - p;
    let mut out = Vec::new();
    let mut injected = s.clone();
    if injected.is_empty() {
        injected.push(0);
    }
    injected[0] += 1;
    out.push((p, injected));
    for x in 0..s.len() {
        if s[x] == 0 {
            continue;
        }
        let mut right = s.clone();
        right[x] -= 1;
        if right.len() == x + 1 {
            right.push(0);
        }
        right[x + 1] += 1;
        out.push((p, trimmed(right)));
        let mut left = s.clone();
        left[x] -= 1;
        if x > 0 {
            left[x - 1] += 1;
        }
        out.push((q, trimmed(left)));
    }
    out
}

/// Law at time t from the empty state on the states with at most
/// `max_total` particles and `max_site` sites, by uniformization. Mass
/// that leaves the truncated set is dropped.
fn truncated_law(p: f64, t: f64, max_total: u64, max_site: usize) -> HashMap<State, f64> {
    let keep = |s: &State| s.iter().sum::<u64>() <= max_total && s.len() <= max_site;
    let rate = p + max_total as f64;
    let mut current: HashMap<State, f64> = HashMap::from([(Vec::new(), 1.0)]);
    let mut law: HashMap<State, f64> = HashMap::new();
    let mut weight = (-rate * t).exp();
    for n in 0..200 {
        for (s, &m) in &current {
            *law.entry(s.clone()).or_default() += weight * m;
        }
        let mut next: HashMap<State, f64> = HashMap::new();
        for (s, &m) in &current {
            let out = moves(s, p);
            let exit: f64 = out.iter().map(|(r, _)| r).sum();
            *next.entry(s.clone()).or_default() += m * (1.0 - exit / rate);
            for (r, target) in out {
                if keep(&target) {
                    *next.entry(target).or_default() += m * r / rate;
                }
            }
        }
        current = next;
        weight *= rate * t / (n + 1) as f64;
    }
    law
}

#[test]
fn short_time_law_matches_generator() {
    let params = AsepParams::new(0.3).unwrap();
    let t = 0.8;
    let law = truncated_law(params.p(), t, 4, 6);
    let n = 100_000u64;
    let mut freq: HashMap<State, u64> = HashMap::new();
    for r in 0..n {
        let c = evolve_zr(&ZrConfig::empty(), &params, t, &mut stream(31, r, subsystem::DYNAMICS)).unwrap();
        let s: State = (1..=c.extent()).map(|x| c.get(x)).collect();
        *freq.entry(s).or_default() += 1;
    }
    let watched: [State; 4] = [vec![], vec![1], vec![0, 1], vec![2]];
    for s in watched {
        let expect = law[&s];
        let seen = freq.get(&s).copied().unwrap_or(0) as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((seen - expect).abs() < 4.5 * se, "{s:?}: {seen} vs {expect}");
    }
}

#[test]
fn product_measure_mean_and_marginals() {
    let r = 0.3 / 0.7;
    let x_max = default_site_cut(r);
    let n = 100_000u64;
    let draws: Vec<ZrConfig> = (0..n)
        .map(|i| sample_mu(r, x_max, &mut stream(41, i, subsystem::INITIAL)).unwrap())
        .collect();
    let mu = mu_sum_distribution(r, 1e-10).unwrap();
    let sums: Vec<f64> = draws.iter().map(|c| tagged_displacement(c) as f64).collect();
    let m = sums.iter().sum::<f64>() / n as f64;
    let var = sums.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1) as f64;
    assert!((m - mu.mean()).abs() < 4.0 * (var / n as f64).sqrt(), "{m} vs {}", mu.mean());
    // Σ_x r^x/(1 − r^x), summed directly.
    let direct: f64 = (1..200).map(|x| r.powi(x) / (1.0 - r.powi(x))).sum();
    assert!((mu.mean() - direct).abs() < 1e-8);

    for x in [1usize, 2, 3] {
        let rx = r.powi(x as i32);
        let cells = 4;
        let mut observed = vec![0u64; cells];
        for c in &draws {
            observed[(c.get(x) as usize).min(cells - 1)] += 1;
        }
        let mut chi2 = 0.0;
        for (k, &o) in observed.iter().enumerate() {
            let prob = if k + 1 < cells { (1.0 - rx) * rx.powi(k as i32) } else { rx.powi(k as i32) };
            let e = prob * n as f64;
            chi2 += (o as f64 - e).powi(2) / e;
        }
        let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "site {x}: chi2 {chi2}");
    }
}

#[test]
fn vanishing_ratio_gives_empty_configuration() {
    let c = sample_mu(1e-300, 50, &mut stream(0, 0, subsystem::INITIAL)).unwrap();
    assert_eq!(c, ZrConfig::empty());
    assert_eq!(sample_mu(1.0, 5, &mut stream(0, 0, 0)).unwrap_err(), ZrError::RatioOutOfRange(1.0));
    assert_eq!(AsepParams::new(0.5).unwrap_err(), ZrError::RateOutOfRange(0.5));
}

#[test]
fn coupled_gap_is_nonnegative_and_shrinks() {
    let params = AsepParams::new(0.3).unwrap();
    let r = params.ratio();
    let times = [1.0, 4.0, 16.0];
    let n = 2000u64;
    let mut mean_gap = [0.0; 3];
    for i in 0..n {
        let upper = sample_mu(r, default_site_cut(r), &mut stream(51, i, subsystem::INITIAL)).unwrap();
        let mut lo = ZrConfig::empty();
        let mut up = upper;
        let mut rng = stream(51, i, subsystem::DYNAMICS);
        let mut last = u64::MAX;
        for (j, &t) in times.iter().enumerate() {
            (lo, up) = coupled_evolve(&lo, &up, &params, t, &mut rng, DominationCheck::EveryEvent).unwrap();
            assert_eq!(lo.first_excess_over(&up), None);
            let gap = tagged_displacement(&up) - tagged_displacement(&lo);
            // Unmatched upper particles can only leave.
            assert!(gap <= last);
            last = gap;
            mean_gap[j] += gap as f64 / n as f64;
        }
    }
    assert!(mean_gap[0] > mean_gap[1] && mean_gap[1] > mean_gap[2], "{mean_gap:?}");
}

#[test]
fn domination_is_checked_on_entry() {
    let params = AsepParams::new(0.2).unwrap();
    let lower = ZrConfig::from_pairs(&[(2, 1)]);
    let upper = ZrConfig::from_pairs(&[(1, 3)]);
    let err = coupled_evolve(&lower, &upper, &params, 1.0, &mut stream(0, 0, 0), DominationCheck::AtEnd).unwrap_err();
    assert!(matches!(err, ZrError::DominationViolated { site: 2, .. }));
}

#[test]
fn stationary_start_stays_stationary_in_mean() {
    let params = AsepParams::new(0.3).unwrap();
    let mu = mu_sum_distribution(params.ratio(), 1e-10).unwrap();
    let sums = replicate_sums(ZrStart::Stationary, &params, 20.0, 20_000, 61).unwrap();
    let xs: Vec<f64> = sums.iter().map(|&s| s as f64).collect();
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1.0);
    assert!((m - mu.mean()).abs() < 4.0 * (var / n).sqrt(), "{m} vs {}", mu.mean());
}

#[test]
fn replicate_sums_are_reproducible() {
    let params = AsepParams::new(0.3).unwrap();
    let a = replicate_sums(ZrStart::Empty, &params, 5.0, 64, 3).unwrap();
    let b = replicate_sums(ZrStart::Empty, &params, 5.0, 64, 3).unwrap();
    assert_eq!(a, b);
    let late = ZrConfig::from_pairs(&[(1, 1)]);
    let later = evolve_zr(&late, &params, 2.0, &mut stream(0, 0, 0)).unwrap();
    assert!(matches!(
        evolve_zr(&later, &params, 1.0, &mut stream(0, 0, 0)),
        Err(ZrError::EndBeforeStart { .. })
    ));
}
