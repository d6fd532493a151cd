//! Experiment runner behind the `credal-lln` binary.
//!
//! One experiment per invocation. Each run writes its CSV series and a
//! `report.json` into the output directory; the process exit code is 0 when every
//! verdict passes, 2 when any verdict fails and 1 on usage or input errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analyze::{
    self, averages_of, cluster_coverage_of, default_n0, scaled_eps, tail_stats_of, violates, DEFAULT_CLUSTER_EPS,
    DEFAULT_INTERVAL_EPS,
};
use crate::credal::{CredalSet, Event, FinitePmf};
use crate::functions::NamedFunction;
use crate::pengdp::{self, brute_force_strategy_oracle, peng_sum, Sense, DEFAULT_LATTICE_CAP};
use crate::rng::{replicate_seed, StepStream, GENERATOR_NAME};
use crate::simulate::{default_targets, sample_paths, stress_suite, Interleave, PolicySpec, SamplePath, DEFAULT_RHO};
use crate::sublin::{self, Capacity};
use crate::{Error, Result, EXACT_TOL};

/// Threshold on the fraction of replicates allowed to leave the mean interval.
pub const MAX_VIOLATION_RATE: f64 = 0.01;
/// Required fraction of replicates meeting a per-path criterion.
pub const MIN_SUCCESS_RATE: f64 = 0.95;
/// Tolerance between the DP and the strategy oracle.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Expect,
    Choquet,
    Dp,
    Curve,
    Lemma4,
    Chebyshev,
    Simulate,
    #[value(name = "verify-slln-1")]
    #[serde(rename = "verify-slln-1")]
    VerifySlln1,
    #[value(name = "verify-slln-2")]
    #[serde(rename = "verify-slln-2")]
    VerifySlln2,
    #[value(name = "verify-slln-3")]
    #[serde(rename = "verify-slln-3")]
    VerifySlln3,
    OracleSuite,
    Analyze,
}

impl Experiment {
    fn is_stochastic(self) -> bool {
        matches!(
            self,
            Experiment::Simulate
                | Experiment::VerifySlln1
                | Experiment::VerifySlln2
                | Experiment::VerifySlln3
                | Experiment::OracleSuite
        )
    }
}

/// A policy given either in short form (`max`, `blocks:0.35,0.5`) or as a full spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyParam {
    Short(String),
    Spec(PolicySpec),
}

/// Experiment-specific knobs. Unset fields take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyParam>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interleave: Option<Interleave>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_cap: Option<usize>,
}

impl Parameters {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: Parameters) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            n,
            ns,
            replicates,
            seed,
            policy,
            epsilon,
            m,
            rho,
            targets,
            n0,
            function,
            event,
            interleave,
            instances,
            inputs,
            criterion,
            lattice_cap
        );
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credal: Option<PathBuf>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Config file form; the experiment may come from the command line instead.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<Experiment>,
    credal: Option<PathBuf>,
    #[serde(default)]
    parameters: Parameters,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    fn at_most(criterion: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { criterion: criterion.into(), value, threshold, pass: value <= threshold }
    }

    fn at_least(criterion: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { criterion: criterion.into(), value, threshold, pass: value >= threshold }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub verdicts: Vec<Verdict>,
    pub series: Vec<PathBuf>,
    pub generator: String,
    pub elapsed_ms: u128,
    pub results: Value,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

struct Outcome {
    verdicts: Vec<Verdict>,
    series: Vec<PathBuf>,
    results: Value,
}

impl Outcome {
    fn new() -> Self {
        Self { verdicts: Vec::new(), series: Vec::new(), results: Value::Null }
    }
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    params: &'a Parameters,
}

impl Ctx<'_> {
    fn credal(&self) -> Result<CredalSet> {
        let path = self.config.credal.as_ref().ok_or_else(|| Error::Parse("missing --credal <file>".into()))?;
        CredalSet::from_json_file(path)
    }

    fn seed(&self) -> Result<u64> {
        self.params.seed.ok_or_else(|| Error::Parse("stochastic experiments need --seed".into()))
    }

    fn function(&self, default: &str) -> Result<NamedFunction> {
        NamedFunction::from_str(self.params.function.as_deref().unwrap_or(default))
    }

    fn policy(&self, cs: &CredalSet) -> Result<PolicySpec> {
        let rho = self.params.rho.unwrap_or(DEFAULT_RHO);
        match &self.params.policy {
            None => Ok(PolicySpec::ConstantMax),
            Some(PolicyParam::Spec(spec)) => Ok(spec.clone()),
            Some(PolicyParam::Short(text)) if Path::new(text).is_file() => {
                Ok(serde_json::from_str(&fs::read_to_string(text)?)?)
            }
            Some(PolicyParam::Short(text)) => {
                let spec = PolicySpec::parse(text, rho)?;
                // `blocks` without explicit targets uses the default spread
                Ok(match spec {
                    PolicySpec::BlockTargets { targets, rho, interleave } if targets.is_empty() => {
                        PolicySpec::BlockTargets { targets: self.targets(cs), rho, interleave }
                    }
                    other => other,
                })
            }
        }
    }

    fn targets(&self, cs: &CredalSet) -> Vec<f64> {
        self.params.targets.clone().unwrap_or_else(|| default_targets(cs))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn replicate_seeds(&self) -> Result<Vec<u64>> {
        let seed = self.seed()?;
        let r = self.params.replicates.unwrap_or(200);
        if r == 0 {
            return Err(Error::InvalidParameter("replicates must be positive".into()));
        }
        Ok((0..r).map(|i| replicate_seed(seed, i)).collect())
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one experiment, writing series and `report.json` under `out_dir`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params = &config.parameters;
    let ctx = Ctx { config, params };
    if config.experiment.is_stochastic() && config.experiment != Experiment::OracleSuite {
        ctx.seed()?;
    }
    fs::create_dir_all(&config.out_dir)?;
    let outcome = match config.experiment {
        Experiment::Expect => run_expect(&ctx)?,
        Experiment::Choquet => run_choquet(&ctx)?,
        Experiment::Dp => run_dp(&ctx)?,
        Experiment::Curve => run_curve(&ctx)?,
        Experiment::Lemma4 => run_lemma4(&ctx)?,
        Experiment::Chebyshev => run_chebyshev(&ctx)?,
        Experiment::Simulate => run_simulate(&ctx)?,
        Experiment::VerifySlln1 => run_slln1(&ctx)?,
        Experiment::VerifySlln2 => run_slln2(&ctx)?,
        Experiment::VerifySlln3 => run_slln3(&ctx)?,
        Experiment::OracleSuite => run_oracle_suite(&ctx)?,
        Experiment::Analyze => run_analyze(&ctx)?,
    };
    let report = ExperimentReport {
        config: config.clone(),
        verdicts: outcome.verdicts,
        series: outcome.series,
        generator: GENERATOR_NAME.to_string(),
        elapsed_ms: start.elapsed().as_millis(),
        results: outcome.results,
    };
    fs::write(config.out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

fn quantity_rows(pairs: &[(&str, f64)]) -> Vec<Vec<String>> {
    pairs.iter().map(|(k, v)| vec![k.to_string(), fmt_real(*v)]).collect()
}

fn run_expect(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let f = ctx.function("identity")?;
    let mut out = Outcome::new();
    let pair = sublin::expectation_pair(&cs, &f.as_fn())?;
    let mut rows = vec![("upper_expectation", pair.upper), ("lower_expectation", pair.lower)];
    out.verdicts.push(Verdict::at_most("ordering", pair.lower - pair.upper, EXACT_TOL));

    let mut events: Vec<Event> = cs.union_support().iter().map(|&x| Event::new([x])).collect();
    let mut event_result = Value::Null;
    if let Some(members) = &ctx.params.event {
        let a = Event::new(members.iter().copied());
        let caps = sublin::capacity_pair(&cs, &a)?;
        rows.push(("upper_capacity", caps.upper));
        rows.push(("lower_capacity", caps.lower));
        event_result = json!({"members": a.members(), "upper": caps.upper, "lower": caps.lower});
        events.push(a);
    }
    let worst_duality = events
        .iter()
        .map(|a| Ok((sublin::upper_capacity(&cs, a)? + sublin::lower_capacity(&cs, &a.complement(&cs))? - 1.0).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.verdicts.push(Verdict::at_most("duality", worst_duality, EXACT_TOL));

    let cu = sublin::choquet_integral_upper(&cs);
    let cl = sublin::choquet_integral_lower(&cs);
    rows.push(("choquet_upper", cu));
    rows.push(("choquet_lower", cl));
    let path = ctx.out("expect.csv");
    write_csv(&path, &["quantity", "value"], &quantity_rows(&rows))?;
    out.series.push(path);
    out.results = json!({
        "function": f.to_string(),
        "upper": pair.upper,
        "lower": pair.lower,
        "event": event_result,
        "choquet_upper": cu,
        "choquet_lower": cl,
    });
    Ok(out)
}

fn run_choquet(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let mut out = Outcome::new();
    let e = sublin::upper_expectation(&cs, &|x| x)?;
    let le = sublin::lower_expectation(&cs, &|x| x)?;
    let cu = sublin::choquet_integral(&cs, Capacity::Upper);
    let cl = sublin::choquet_integral(&cs, Capacity::Lower);
    out.verdicts.push(Verdict::at_most("upper-sandwich", e - cu, EXACT_TOL));
    out.verdicts.push(Verdict::at_most("lower-sandwich", cl - le, EXACT_TOL));
    let path = ctx.out("choquet.csv");
    write_csv(
        &path,
        &["quantity", "value"],
        &quantity_rows(&[
            ("upper_expectation", e),
            ("choquet_upper", cu),
            ("lower_expectation", le),
            ("choquet_lower", cl),
        ]),
    )?;
    out.series.push(path);
    out.results = json!({"upper_expectation": e, "choquet_upper": cu, "lower_expectation": le, "choquet_lower": cl});
    Ok(out)
}

fn run_dp(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let f = ctx.function("identity")?;
    let n = ctx.params.n.unwrap_or(10);
    let cap = ctx.params.lattice_cap.unwrap_or(DEFAULT_LATTICE_CAP);
    let g = f.as_fn();
    let upper = peng_sum(&cs, n, &g, Sense::Upper, cap)?;
    let lower = -peng_sum(&cs, n, &|s| -g(s), Sense::Upper, cap)?;
    let mut out = Outcome::new();
    out.verdicts.push(Verdict::at_most("ordering", lower - upper, 1e-9));
    let path = ctx.out("dp.csv");
    write_csv(&path, &["quantity", "value"], &quantity_rows(&[("upper", upper), ("lower", lower)]))?;
    out.series.push(path);
    out.results = json!({"function": f.to_string(), "n": n, "upper": upper, "lower": lower});
    Ok(out)
}

fn run_curve(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let f = ctx.function("proof-phi:0.1")?;
    let ns = ctx.params.ns.clone().unwrap_or_else(|| vec![8, 16, 32, 64, 128, 256]);
    if ns.is_empty() {
        return Err(Error::InvalidParameter("ns must not be empty".into()));
    }
    let tol = ctx.params.epsilon.unwrap_or(0.05);
    let curve = pengdp::weak_lln_curve(&cs, &f.as_fn(), &ns)?;
    let rows: Vec<Vec<String>> =
        curve.points.iter().map(|&(n, v)| vec![n.to_string(), fmt_real(v), fmt_real(curve.target)]).collect();
    let path = ctx.out("curve.csv");
    write_csv(&path, &["n", "value", "target"], &rows)?;
    let first = (curve.points[0].1 - curve.target).abs();
    let last = (curve.points[curve.points.len() - 1].1 - curve.target).abs();
    let mut out = Outcome::new();
    out.verdicts.push(Verdict::at_most("terminal-error", last, tol));
    out.verdicts.push(Verdict::at_most("error-trend", last - first, 0.0));
    out.series.push(path);
    out.results = json!({"function": f.to_string(), "points": curve.points, "target": curve.target});
    Ok(out)
}

fn run_lemma4(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let m = ctx.params.m.unwrap_or(15.0);
    let ns = ctx.params.ns.clone().unwrap_or_else(|| vec![10, 100, 1_000, 10_000, 100_000]);
    let points = pengdp::lemma4_product_bound(&cs, m, &ns)?;
    let growth = points.windows(2).map(|w| w[1].value - w[0].value).fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.n.to_string(), fmt_real(p.lambda), fmt_real(p.log_value), fmt_real(p.value)])
        .collect();
    let path = ctx.out("lemma4.csv");
    write_csv(&path, &["n", "lambda", "log_value", "value"], &rows)?;
    let mut out = Outcome::new();
    out.verdicts.push(Verdict::at_most("max-successive-growth", growth.max(0.0), 1e-9));
    let finite = points.iter().all(|p| p.value.is_finite());
    out.verdicts.push(Verdict {
        criterion: "finite".into(),
        value: f64::from(u8::from(finite)),
        threshold: 1.0,
        pass: finite,
    });
    out.series.push(path);
    out.results = json!({"m": m, "points": points});
    Ok(out)
}

fn run_chebyshev(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let eps = ctx.params.epsilon.unwrap_or(0.1);
    let m = ctx.params.m.unwrap_or(15.0);
    let ns = ctx.params.ns.clone().or(ctx.params.n.map(|n| vec![n])).unwrap_or_else(|| vec![50, 100, 200]);
    let reports = ns.iter().map(|&n| pengdp::chebyshev_capacity_bound(&cs, eps, m, n)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> =
        reports.iter().map(|r| vec![r.n.to_string(), fmt_real(r.lhs), fmt_real(r.rhs), r.holds.to_string()]).collect();
    let path = ctx.out("chebyshev.csv");
    write_csv(&path, &["n", "lhs", "rhs", "holds"], &rows)?;
    let mut out = Outcome::new();
    for r in &reports {
        out.verdicts.push(Verdict {
            criterion: format!("chebyshev/n={}", r.n),
            value: r.lhs - r.rhs,
            threshold: 0.0,
            pass: r.holds,
        });
    }
    out.series.push(path);
    out.results = json!({"epsilon": eps, "m": m, "reports": reports});
    Ok(out)
}

/// CSV rows `step, x, prior_index, running_mean` for one path.
pub fn path_rows(path: &SamplePath) -> Vec<Vec<String>> {
    let mut sum = 0.0;
    path.xs
        .iter()
        .zip(&path.policy_trace)
        .enumerate()
        .map(|(i, (&x, &k))| {
            sum += x;
            vec![(i + 1).to_string(), fmt_real(x), k.to_string(), fmt_real(sum / (i + 1) as f64)]
        })
        .collect()
}

pub const PATH_HEADER: [&str; 4] = ["step", "x", "prior_index", "running_mean"];

fn run_simulate(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let spec = ctx.policy(&cs)?;
    let policy = spec.build(&cs)?;
    let n = ctx.params.n.unwrap_or(10_000);
    let seeds = ctx.replicate_seeds()?;
    let paths = sample_paths(&cs, &policy, n, &seeds)?;
    let mut out = Outcome::new();
    let width = seeds.len().to_string().len();
    for (r, path) in paths.iter().enumerate() {
        let file = ctx.out(&format!("run_{r:0width$}.csv"));
        write_csv(&file, &PATH_HEADER, &path_rows(path))?;
        out.series.push(file);
    }
    let rho = match &spec {
        PolicySpec::BlockTargets { rho, .. } => Some(*rho),
        _ => None,
    };
    let metadata = json!({
        "seed": ctx.params.seed,
        "replicate_seeds": seeds,
        "policy": spec,
        "rho": rho,
        "block_lengths": "ceil(rho^k), k = 0, 1, ...",
        "generator": GENERATOR_NAME,
        "n": n,
        "credal_id": cs.fingerprint(),
    });
    let meta_path = ctx.out("run_metadata.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&metadata)?)?;
    out.series.push(meta_path);
    out.results = metadata;
    Ok(out)
}

fn run_slln1(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let n = ctx.params.n.unwrap_or(20_000);
    let n0 = ctx.params.n0.unwrap_or_else(|| default_n0(n));
    let (lo, hi) = (cs.mu_lower(), cs.mu_upper());
    let eps = ctx.params.epsilon.unwrap_or_else(|| scaled_eps(DEFAULT_INTERVAL_EPS, lo, hi));
    let rho = ctx.params.rho.unwrap_or(DEFAULT_RHO);
    let seeds = ctx.replicate_seeds()?;
    let mut out = Outcome::new();
    let mut rows = Vec::new();
    let mut rates = BTreeMap::new();
    for (name, spec) in stress_suite(&cs, &ctx.targets(&cs), rho) {
        let paths = sample_paths(&cs, &spec.build(&cs)?, n, &seeds)?;
        let mut violations = 0usize;
        for (r, p) in paths.iter().enumerate() {
            let stats = analyze::tail_stats(p, n0)?;
            let v = violates(&stats, lo, hi, eps);
            violations += usize::from(v);
            rows.push(vec![
                name.to_string(),
                r.to_string(),
                p.seed.to_string(),
                fmt_real(stats.tail_inf),
                fmt_real(stats.tail_sup),
                fmt_real(stats.final_mean),
                v.to_string(),
            ]);
        }
        let rate = violations as f64 / paths.len() as f64;
        rates.insert(name, rate);
        out.verdicts.push(Verdict::at_most(format!("slln1/{name}"), rate, MAX_VIOLATION_RATE));
    }
    let path = ctx.out("slln1.csv");
    write_csv(&path, &["policy", "replicate", "seed", "tail_inf", "tail_sup", "final_mean", "violated"], &rows)?;
    out.series.push(path);
    out.results = json!({"n": n, "n0": n0, "epsilon": eps, "rho": rho, "rates": rates});
    Ok(out)
}

fn run_slln2(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let n = ctx.params.n.unwrap_or(20_000);
    let seeds = ctx.replicate_seeds()?;
    let mut out = Outcome::new();
    let mut rows = Vec::new();
    let mut fractions = BTreeMap::new();
    let sides = [
        ("constant-max", PolicySpec::ConstantMax, cs.mu_upper(), cs.argmax_mean()),
        ("constant-min", PolicySpec::ConstantMin, cs.mu_lower(), cs.argmin_mean()),
    ];
    for (name, spec, mu, idx) in sides {
        let radius = 4.0 * cs.priors()[idx].variance().sqrt() / (n as f64).sqrt();
        let paths = sample_paths(&cs, &spec.build(&cs)?, n, &seeds)?;
        let mut within = 0usize;
        for (r, p) in paths.iter().enumerate() {
            let fm = p.xs.iter().sum::<f64>() / n as f64;
            let ok = (fm - mu).abs() <= radius;
            within += usize::from(ok);
            rows.push(vec![
                name.to_string(),
                r.to_string(),
                p.seed.to_string(),
                fmt_real(fm),
                fmt_real(fm - mu),
                ok.to_string(),
            ]);
        }
        let frac = within as f64 / paths.len() as f64;
        fractions.insert(name, json!({"fraction": frac, "radius": radius, "mean": mu}));
        out.verdicts.push(Verdict::at_least(format!("slln2/{name}"), frac, MIN_SUCCESS_RATE));
    }
    let path = ctx.out("slln2.csv");
    write_csv(&path, &["policy", "replicate", "seed", "final_mean", "deviation", "within"], &rows)?;
    out.series.push(path);
    out.results = json!({"n": n, "sides": fractions});
    Ok(out)
}

fn run_slln3(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let n = ctx.params.n.unwrap_or(1 << 15);
    let n0 = ctx.params.n0.unwrap_or(64);
    let (lo, hi) = (cs.mu_lower(), cs.mu_upper());
    let eps = ctx.params.epsilon.unwrap_or_else(|| scaled_eps(DEFAULT_CLUSTER_EPS, lo, hi));
    let band = scaled_eps(DEFAULT_INTERVAL_EPS, lo, hi);
    let rho = ctx.params.rho.unwrap_or(DEFAULT_RHO);
    let targets = ctx.targets(&cs);
    let interleave = ctx.params.interleave.unwrap_or(Interleave::Deterministic);
    let spec = PolicySpec::BlockTargets { targets: targets.clone(), rho, interleave };
    let seeds = ctx.replicate_seeds()?;
    let paths = sample_paths(&cs, &spec.build(&cs)?, n, &seeds)?;
    let mut rows = Vec::new();
    let (mut all_hit, mut exits) = (0usize, 0usize);
    for (r, p) in paths.iter().enumerate() {
        let avgs = averages_of(&p.xs)?;
        let report = cluster_coverage_of(&avgs, &targets, n0, eps)?;
        let stats = tail_stats_of(&avgs, n0)?;
        let exited = violates(&stats, lo, hi, band);
        all_hit += usize::from(report.all_hit());
        exits += usize::from(exited);
        for h in &report.hits {
            rows.push(vec![
                r.to_string(),
                p.seed.to_string(),
                fmt_real(h.target),
                fmt_real(h.distance),
                h.at.to_string(),
                h.hit.to_string(),
                exited.to_string(),
            ]);
        }
    }
    let hit_rate = all_hit as f64 / paths.len() as f64;
    let exit_rate = exits as f64 / paths.len() as f64;
    let path = ctx.out("slln3.csv");
    write_csv(&path, &["replicate", "seed", "target", "distance", "at", "hit", "exited"], &rows)?;
    let mut out = Outcome::new();
    out.verdicts.push(Verdict::at_least("slln3/all-targets-hit", hit_rate, MIN_SUCCESS_RATE));
    out.verdicts.push(Verdict::at_most("slln3/inside-interval", exit_rate, MAX_VIOLATION_RATE));
    out.series.push(path);
    out.results = json!({
        "n": n, "n0": n0, "epsilon": eps, "band": band, "rho": rho, "targets": targets,
        "hit_rate": hit_rate, "exit_rate": exit_rate,
    });
    Ok(out)
}

/// Functional shape `k` (0..10) applied to `S_n`; `c` is a centring constant.
pub fn oracle_shape(k: usize, c: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| match k % 10 {
        0 => s,
        1 => s * s,
        2 => {
            if (s - c.round()).abs() < 1e-9 {
                1.0
            } else {
                0.0
            }
        }
        3 => {
            if s >= c {
                1.0
            } else {
                0.0
            }
        }
        4 => (0.5 * s).exp(),
        5 => s.sin(),
        6 => (s - c).abs(),
        7 => (s - c).max(0.0),
        8 => -(s - c) * (s - c),
        _ => (2.0 * s).cos() + 0.1 * s,
    }
}

/// A random instance for the DP-versus-oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub credal: CredalSet,
    pub n: usize,
    pub shape: usize,
}

/// Draws `count` instances with at most 3 priors, 3 support points and horizon 4,
/// keeping only those the strategy oracle can enumerate.
pub fn oracle_instances(seed: u64, count: usize) -> Vec<OracleInstance> {
    let mut stream = StepStream::new(seed);
    let mut next = move || stream.next_step()[0];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = 1 + (next() * 3.0) as usize;
        let m = 1 + (next() * 3.0) as usize;
        let n = 1 + (next() * 4.0) as usize;
        let internal: usize = (0..n).map(|d| m.pow(d as u32)).sum();
        if (k as f64).powi(internal as i32) * (m.pow(n as u32) as f64) > pengdp::ORACLE_LIMIT {
            continue;
        }
        // support from a small grid so sums collide across paths
        let mut values: Vec<f64> = Vec::new();
        while values.len() < m {
            let v = ((next() * 9.0).floor() - 4.0) * 0.5;
            if !values.contains(&v) {
                values.push(v);
            }
        }
        let priors = (0..k)
            .map(|_| {
                let w: Vec<f64> = (0..m).map(|_| 0.05 + next()).collect();
                let total: f64 = w.iter().sum();
                FinitePmf::new(&values, &w.iter().map(|x| x / total).collect::<Vec<_>>()).expect("valid pmf")
            })
            .collect();
        let shape = out.len() % 10;
        out.push(OracleInstance { credal: CredalSet::new(priors).expect("nonempty"), n, shape });
    }
    out
}

fn run_oracle_suite(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.params.seed.unwrap_or(0);
    let count = ctx.params.instances.unwrap_or(50);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (i, inst) in oracle_instances(seed, count).iter().enumerate() {
        let cs = &inst.credal;
        let c = 0.5 * inst.n as f64 * (cs.mu_lower() + cs.mu_upper());
        let g = oracle_shape(inst.shape, c);
        let upper = pengdp::peng_upper_sum(cs, inst.n, &g)?;
        let lower = pengdp::peng_lower_sum(cs, inst.n, &g)?;
        let oracle = brute_force_strategy_oracle(cs, inst.n, &|xs: &[f64]| g(xs.iter().sum()))?;
        let diff = (upper - oracle.upper).abs().max((lower - oracle.lower).abs());
        worst = worst.max(diff);
        rows.push(vec![
            i.to_string(),
            cs.len().to_string(),
            cs.union_support().len().to_string(),
            inst.n.to_string(),
            inst.shape.to_string(),
            fmt_real(upper),
            fmt_real(oracle.upper),
            fmt_real(lower),
            fmt_real(oracle.lower),
            fmt_real(diff),
        ]);
    }
    let path = ctx.out("oracle.csv");
    write_csv(
        &path,
        &[
            "instance",
            "priors",
            "support",
            "n",
            "shape",
            "dp_upper",
            "oracle_upper",
            "dp_lower",
            "oracle_lower",
            "abs_diff",
        ],
        &rows,
    )?;
    let mut out = Outcome::new();
    out.verdicts.push(Verdict::at_most("oracle-equivalence", worst, ORACLE_TOL));
    out.series.push(path);
    out.results = json!({"instances": count, "max_abs_diff": worst});
    Ok(out)
}

/// Reads the `x` column of a run CSV written by `simulate`.
pub fn read_run_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "x")
        .ok_or_else(|| Error::Parse(format!("{}: no 'x' column", path.display())))?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            rec.get(col)
                .unwrap_or_default()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension().is_some_and(|x| x == "csv")
                        && f.file_name().is_some_and(|n| n.to_string_lossy().starts_with("run_"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(files)
}

fn run_analyze(ctx: &Ctx) -> Result<Outcome> {
    let cs = ctx.credal()?;
    let inputs = collect_inputs(ctx.params.inputs.as_deref().unwrap_or_default())?;
    let (lo, hi) = (cs.mu_lower(), cs.mu_upper());
    let criterion = ctx.params.criterion.clone().unwrap_or_else(|| "interval".into());
    let series: Vec<Vec<f64>> = inputs.iter().map(|p| read_run_csv(p)).collect::<Result<_>>()?;
    let mut out = Outcome::new();
    let verdict_doc = match criterion.as_str() {
        "interval" => {
            let eps = ctx.params.epsilon.unwrap_or_else(|| scaled_eps(DEFAULT_INTERVAL_EPS, lo, hi));
            let mut violations = 0usize;
            for xs in &series {
                let n0 = ctx.params.n0.unwrap_or_else(|| default_n0(xs.len()));
                violations += usize::from(violates(&tail_stats_of(&averages_of(xs)?, n0)?, lo, hi, eps));
            }
            let rate = violations as f64 / series.len() as f64;
            out.verdicts.push(Verdict::at_most("interval", rate, MAX_VIOLATION_RATE));
            json!({"criterion": "interval", "rate": rate, "threshold": MAX_VIOLATION_RATE, "pass": rate <= MAX_VIOLATION_RATE})
        }
        "cluster" => {
            let eps = ctx.params.epsilon.unwrap_or_else(|| scaled_eps(DEFAULT_CLUSTER_EPS, lo, hi));
            let targets = ctx.targets(&cs);
            let mut distances = Vec::new();
            let mut all_hit = 0usize;
            for xs in &series {
                let report = cluster_coverage_of(&averages_of(xs)?, &targets, ctx.params.n0.unwrap_or(64), eps)?;
                all_hit += usize::from(report.all_hit());
                distances.push(report.hits.iter().map(|h| h.distance).collect::<Vec<_>>());
            }
            let rate = all_hit as f64 / series.len() as f64;
            out.verdicts.push(Verdict::at_least("cluster", rate, MIN_SUCCESS_RATE));
            json!({"criterion": "cluster", "targets": targets, "distances": distances, "rate": rate,
                   "threshold": MIN_SUCCESS_RATE, "pass": rate >= MIN_SUCCESS_RATE})
        }
        other => return Err(Error::Parse(format!("unknown analyze criterion '{other}' (interval|cluster)"))),
    };
    let path = ctx.out("verdict.json");
    fs::write(&path, serde_json::to_string_pretty(&verdict_doc)?)?;
    out.series.push(path);
    out.results = verdict_doc;
    Ok(out)
}

/// Command-line surface. Flags override values from `--config`.
#[derive(Debug, Parser)]
#[command(
    name = "credal-lln",
    version,
    about = "Sub-linear expectations and strong laws of large numbers over finite credal sets"
)]
pub struct Cli {
    /// Experiment to run.
    pub experiment: Experiment,
    /// JSON config: {"credal", "parameters", "out_dir"}.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Credal set JSON file.
    #[arg(long)]
    pub credal: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Policy short form (max, min, index:<i>, periodic:<i,..>, blocks:<t,..>, blocks-random:<t,..>) or a JSON file.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long, alias = "eps")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub targets: Option<Vec<f64>>,
    #[arg(long)]
    pub n0: Option<usize>,
    /// Named function, e.g. identity, square, indicator-ge:1, proof-phi:0.1, bump:0.5:0.2.
    #[arg(long)]
    pub function: Option<String>,
    /// Event members, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub event: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub interleave: Option<Interleave>,
    #[arg(long)]
    pub instances: Option<usize>,
    /// Run CSVs or directories for `analyze`.
    #[arg(long, num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    /// `analyze` criterion: interval or cluster.
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long)]
    pub lattice_cap: Option<usize>,
}

impl Cli {
    /// Merges the optional config file with command-line overrides.
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => serde_json::from_str::<ConfigFile>(&fs::read_to_string(path)?)?,
            None => ConfigFile::default(),
        };
        if let Some(e) = file.experiment {
            if e != self.experiment {
                return Err(Error::Parse(format!(
                    "config names experiment {e:?} but command line asks for {:?}",
                    self.experiment
                )));
            }
        }
        let overrides = Parameters {
            n: self.n,
            ns: self.ns,
            replicates: self.replicates,
            seed: self.seed,
            policy: self.policy.map(PolicyParam::Short),
            epsilon: self.epsilon,
            m: self.m,
            rho: self.rho,
            targets: self.targets,
            n0: self.n0,
            function: self.function,
            event: self.event,
            interleave: self.interleave,
            instances: self.instances,
            inputs: self.inputs,
            criterion: self.criterion,
            lattice_cap: self.lattice_cap,
        };
        Ok(ExperimentConfig {
            experiment: self.experiment,
            credal: self.credal.or(file.credal),
            parameters: file.parameters.overlay(overrides),
            out_dir: self.out.or(file.out_dir).unwrap_or_else(default_out_dir),
        })
    }
}

/// Parses arguments, runs, prints a summary and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match run(&config) {
        Ok(report) => {
            // a closed stdout (e.g. piped into `head`) must not turn a verdict into a panic
            let mut stdout = std::io::stdout().lock();
            for v in &report.verdicts {
                let status = if v.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(stdout, "{status} {}: value={} threshold={}", v.criterion, v.value, v.threshold);
            }
            let _ = writeln!(stdout, "report: {}", config.out_dir.join("report.json").display());
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_real_has_17_significant_digits() {
        assert_eq!(fmt_real(0.7), "6.9999999999999996e-1");
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_real(-1234.5).parse::<f64>().unwrap(), -1234.5);
        let x = 0.1 + 0.2;
        assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn overlay_prefers_overrides() {
        let base = Parameters { n: Some(5), seed: Some(1), ..Default::default() };
        let top = Parameters { seed: Some(9), ..Default::default() };
        let merged = base.overlay(top);
        assert_eq!((merged.n, merged.seed), (Some(5), Some(9)));
    }

    #[test]
    fn config_json_shape() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"experiment": "verify-slln-2", "credal": "b.json", "parameters": {"n": 100, "seed": 3, "policy": "max"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::VerifySlln2);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.parameters.policy, Some(PolicyParam::Short("max".into())));
        let spec: Parameters = serde_json::from_str(
            r#"{"policy": {"kind": "block-targets", "targets": [0.5], "rho": 2.0, "interleave": "randomized"}}"#,
        )
        .unwrap();
        assert!(matches!(spec.policy, Some(PolicyParam::Spec(PolicySpec::BlockTargets { .. }))));
        assert!(serde_json::from_str::<Parameters>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn oracle_instances_are_enumerable_and_deterministic() {
        let a = oracle_instances(7, 20);
        let b = oracle_instances(7, 20);
        assert_eq!(a.len(), 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.credal, y.credal);
            assert_eq!((x.n, x.shape), (y.n, y.shape));
            assert!(x.credal.len() <= 3 && x.credal.union_support().len() <= 3 && x.n <= 4);
        }
    }
}
