//! Subcommand pipelines. Each writes its artifacts through a [`Sink`] and
//! returns their paths.

use std::path::PathBuf;

use serde_json::json;

use seplab_core::sim::{scaled_position, ObservableSample, RunSpec};
use seplab_core::stats::{ks_distance, pmf_tv, trend_report, EmpiricalDist, TrendMode};
use seplab_core::theory::{self, LimitLaw, ScalingPair};
use seplab_core::zero_range::{self, AsepParams, ZrStart};

use crate::config::Experiment;
use crate::criteria::{self, CriterionResult};
use crate::output::{emit_gumbel_table, num, Sink};
use crate::CliError;

fn law_for(exp: &Experiment, scaling: &ScalingPair) -> Result<LimitLaw, CliError> {
    Ok(theory::limit_law(
        scaling.regime,
        exp.kernel.sigma(),
        exp.profile.rho_bar(),
        exp.config.regime.c,
    )?)
}

fn samples_at(exp: &Experiment, t: f64) -> Result<(Vec<ObservableSample>, ScalingPair, Option<i64>), CliError> {
    let (profile, scaling) = exp.at(t)?;
    let sigma = exp.kernel.sigma();
    let sim = &exp.config.simulation;
    let mut spec = RunSpec::new(profile, exp.kernel.clone(), t, sim.coupling);
    spec.z_list = exp.config.grid.x.iter().map(|&x| theory::threshold(&scaling, sigma, x)).collect();
    spec.m_max = sim.m_max;
    spec.n = sim.replicates;
    spec.base_seed = sim.seed;
    spec.cut_eps = exp.config.eps.cut;
    let cut = spec.resolve_cut()?;
    Ok((spec.run()?, scaling, cut))
}

fn run_meta(exp: &Experiment, t: f64, scaling: &ScalingPair, cut: Option<i64>) -> serde_json::Value {
    json!({
        "t": t,
        "kernel": exp.config.kernel,
        "profile": exp.config.profile,
        "regime": exp.config.regime,
        "scaling": scaling,
        "cut": cut,
        "coupling": exp.config.simulation.coupling,
        "base_seed": exp.config.simulation.seed,
        "replicates": exp.config.simulation.replicates,
    })
}

/// `samples_t<t>.jsonl` and `gumbel_t<t>.csv` per horizon.
pub fn simulate(exp: &Experiment, sink: &Sink) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for &t in &exp.config.grid.t {
        let (samples, scaling, cut) = samples_at(exp, t)?;
        paths.push(sink.write_jsonl(&format!("samples_t{t}.jsonl"), run_meta(exp, t, &scaling, cut), &samples)?);
        let table = emit_gumbel_table(&samples, &scaling, exp.kernel.sigma(), &law_for(exp, &scaling)?, &exp.config.grid.x);
        paths.push(sink.write_csv(&format!("gumbel_t{t}.csv"), &[("t", num(t))], &table)?);
    }
    Ok(paths)
}

/// `theory.csv`: exact means against the Gaussian surrogate and the limit.
pub fn theory(exp: &Experiment, sink: &Sink) -> Result<Vec<PathBuf>, CliError> {
    let sigma = exp.kernel.sigma();
    let mut body = String::from("t,L,a_t,b_t,x,z,expected,expected_error,surrogate,limit,gap\n");
    for &t in &exp.config.grid.t {
        let (profile, scaling) = exp.at(t)?;
        for &x in &exp.config.grid.x {
            let z = theory::threshold(&scaling, sigma, x);
            let e = theory::expected_count(&profile, &exp.kernel, t, z, exp.config.eps.mean)?;
            let asym = theory::mean_excess_asymptote(&scaling, sigma, profile.rho_bar(), x)?;
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                num(t),
                scaling.l.map_or(String::new(), |l| l.to_string()),
                num(scaling.a),
                num(scaling.b),
                num(x),
                num(z),
                num(e.value),
                num(e.error),
                num(asym.surrogate),
                num(asym.limit),
                num(e.value - asym.limit),
            ));
        }
    }
    Ok(vec![sink.write_csv("theory.csv", &[], &body)?])
}

/// `sweep.csv` and `sweep_trend.jsonl`: distance to the limit law and the
/// Poisson gap at x = 0 along the t-grid.
pub fn sweep(exp: &Experiment, sink: &Sink) -> Result<Vec<PathBuf>, CliError> {
    let sigma = exp.kernel.sigma();
    let mut body = String::from("t,n,ks_limit,p0_empirical,p0_poisson,p0_gap\n");
    let mut ks_series = Vec::new();
    let mut gap_series = Vec::new();
    let mut paths = Vec::new();
    for &t in &exp.config.grid.t {
        let (samples, scaling, _) = samples_at(exp, t)?;
        let (profile, _) = exp.at(t)?;
        let law = law_for(exp, &scaling)?;
        let emp = EmpiricalDist::new(samples.iter().map(|s| scaled_position(s.x_t, &scaling, sigma)).collect())?;
        let ks = ks_distance(&emp, |x| law.cdf(x));
        let z = theory::threshold(&scaling, sigma, 0.0);
        let e = theory::expected_count(&profile, &exp.kernel, t, z, exp.config.eps.mean)?;
        let p0 = samples.iter().filter(|s| s.x_t as f64 <= z).count() as f64 / samples.len() as f64;
        let poisson = (-e.value).exp();
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(t),
            samples.len(),
            num(ks),
            num(p0),
            num(poisson),
            num((p0 - poisson).abs())
        ));
        ks_series.push((t, ks));
        gap_series.push((t, (p0 - poisson).abs()));
        let table = emit_gumbel_table(&samples, &scaling, sigma, &law, &exp.config.grid.x);
        paths.push(sink.write_csv(&format!("gumbel_t{t}.csv"), &[("t", num(t))], &table)?);
    }
    paths.push(sink.write_csv("sweep.csv", &[], &body)?);
    if ks_series.len() >= 2 {
        let reports = vec![
            json!({"metric": "ks_limit", "report": trend_report(&ks_series, TrendMode::Decreasing)?}),
            json!({"metric": "p0_gap", "report": trend_report(&gap_series, TrendMode::Decreasing)?}),
        ];
        paths.push(sink.write_jsonl("sweep_trend.jsonl", json!({"kind": "trend"}), &reports)?);
    }
    Ok(paths)
}

/// `asep.csv` (t, replicate, sum), `asep_summary.csv` and `mu_pmf.csv`.
pub fn asep(exp: &Experiment, sink: &Sink) -> Result<Vec<PathBuf>, CliError> {
    let spec = &exp.config.asep;
    let params = AsepParams::new(spec.p)?;
    let mu = zero_range::mu_sum_distribution(params.ratio(), 1e-10)?;
    let mut rows = String::from("t,replicate,sum\n");
    let mut summary = String::from("t,n,mean,tv_to_mu\n");
    for &t in &spec.t {
        let sums = zero_range::replicate_sums(ZrStart::Empty, &params, t, spec.replicates, exp.config.simulation.seed)?;
        for (i, s) in sums.iter().enumerate() {
            rows.push_str(&format!("{},{i},{s}\n", num(t)));
        }
        let mean = sums.iter().sum::<u64>() as f64 / sums.len() as f64;
        let tv = pmf_tv(&sums, |k| mu.prob(k));
        summary.push_str(&format!("{},{},{},{}\n", num(t), sums.len(), num(mean), num(tv)));
    }
    let meta = [("p", num(spec.p)), ("ratio", num(params.ratio()))];
    let mut pmf = Vec::new();
    mu.write_csv(&mut pmf)?;
    Ok(vec![
        sink.write_csv("asep.csv", &meta, &rows)?,
        sink.write_csv("asep_summary.csv", &meta, &summary)?,
        sink.write_csv("mu_pmf.csv", &meta, &String::from_utf8_lossy(&pmf))?,
    ])
}

/// Runs the configured acceptance criteria and writes `verify.jsonl`.
pub fn verify(exp: &Experiment, sink: &Sink) -> Result<(Vec<CriterionResult>, PathBuf), CliError> {
    let ids = &exp.config.verify.criteria;
    let ctx = criteria::Context::new(exp.config.simulation.seed);
    let mut results = Vec::new();
    for &id in ids {
        let r = criteria::run(id, &ctx);
        println!("{}", r.summary());
        results.push(r);
    }
    let path = sink.write_jsonl("verify.jsonl", json!({"criteria": ids}), &results)?;
    Ok((results, path))
}
