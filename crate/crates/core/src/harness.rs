//! Experiment orchestration: configs, multi-seed execution on a worker pool,
//! and CSV trace persistence.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{make_finite_mab, make_linear_bandit, make_revealing_semibandit, Problem, RngStream};
use crate::error::{E2dError, Result};
use crate::estimation::{finite_divergences, linear_divergences};
use crate::linear_dec::{FwOptions, GapKind};
use crate::policy::{build_policy, Estimate, LambdaMode, PolicySpec, SolverSettings};

pub const CSV_HEADER: [&str; 11] = [
    "run_id",
    "policy",
    "t",
    "decision",
    "instant_regret",
    "cum_regret",
    "epsilon_sq",
    "lambda",
    "dec_value",
    "est_increment",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Mab,
    Linear,
    Revealing,
}

fn default_models() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub kind: InstanceKind,
    /// Parameter dimension (ignored for `mab`).
    #[serde(default = "one")]
    pub d: usize,
    pub n_decisions: usize,
    /// Number of models (`mab` only).
    #[serde(default = "default_models")]
    pub n_models: usize,
    pub seed: u64,
}

fn one() -> usize {
    1
}

pub fn generate_problem(spec: &GenerateSpec) -> Result<Problem> {
    let mut rng = RngStream::new(spec.seed);
    Ok(match spec.kind {
        InstanceKind::Mab => Problem::Finite(make_finite_mab(spec.n_decisions, spec.n_models, &mut rng)?),
        InstanceKind::Linear => Problem::Linear(make_linear_bandit(spec.d, spec.n_decisions, &mut rng)?),
        InstanceKind::Revealing => Problem::Linear(make_revealing_semibandit(spec.d, spec.n_decisions, &mut rng)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Inline(Problem),
    /// Path to an instance JSON; relative paths resolve against the config file.
    File(PathBuf),
    Generate(GenerateSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub name: String,
    pub policy: PolicySpec,
}

fn default_fw_steps() -> usize {
    100
}

fn default_lambda_grid() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub policies: Vec<PolicyConfig>,
    pub horizon: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_fw_steps")]
    pub fw_steps: usize,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_runs == 0 {
            return Err(E2dError::InvalidParameter("horizon and n_runs must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(E2dError::InvalidParameter("no policies configured".into()));
        }
        let mut names: Vec<&str> = self.policies.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(E2dError::InvalidParameter(format!("duplicate policy name `{}`", w[0])));
        }
        if self.fw_steps == 0 || self.lambda_grid == 0 {
            return Err(E2dError::InvalidParameter("fw_steps and lambda_grid must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        if let InstanceSource::File(p) = &mut cfg.instance {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn resolve_problem(&self) -> Result<Problem> {
        let problem = match &self.instance {
            InstanceSource::Inline(p) => p.clone(),
            InstanceSource::File(path) => {
                let mut text = String::new();
                File::open(path)?.read_to_string(&mut text)?;
                serde_json::from_str(&text)?
            }
            InstanceSource::Generate(spec) => generate_problem(spec)?,
        };
        problem.validate()?;
        Ok(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Exp1,
    Exp2,
}

fn named(name: &str, policy: PolicySpec) -> PolicyConfig {
    PolicyConfig { name: name.to_string(), policy }
}

fn anytime() -> PolicySpec {
    PolicySpec::AnytimeE2d { lambda_mode: LambdaMode::Grid, gap: GapKind::Shifted, ridge: 1.0 }
}

fn fixed(horizon: usize) -> PolicySpec {
    PolicySpec::FixedE2d { lambda: None, tuned_horizon: Some(horizon), gap: GapKind::Shifted, ridge: 1.0 }
}

fn extra_policies() -> [PolicyConfig; 3] {
    [
        named(
            "anytime_e2d_closed_form",
            PolicySpec::AnytimeE2d { lambda_mode: LambdaMode::ClosedForm, gap: GapKind::Shifted, ridge: 1.0 },
        ),
        named("ts", PolicySpec::Ts { ridge: 1.0, posterior_scale: 1.0 }),
        named("ucb", PolicySpec::Ucb { ridge: 1.0, confidence_scale: 1.0 }),
    ]
}

impl Preset {
    /// Revealing-action semi-bandit presets. The instance is drawn once from
    /// `base_seed` and shared by every run.
    pub fn config(self, base_seed: u64) -> ExperimentConfig {
        let (d, horizon, n_runs, policies) = match self {
            Preset::Exp1 => {
                let mut p = vec![named("anytime_e2d", anytime())];
                for n in [200, 500, 1000, 2000] {
                    p.push(named(&format!("e2d_n{n}"), fixed(n)));
                }
                p.extend(extra_policies());
                (3, 2000, 20, p)
            }
            Preset::Exp2 => {
                let mut p = vec![named("anytime_e2d", anytime()), named("e2d_n1000", fixed(1000))];
                p.extend(extra_policies());
                (30, 1000, 10, p)
            }
        };
        ExperimentConfig {
            instance: InstanceSource::Generate(GenerateSpec {
                kind: InstanceKind::Revealing,
                d,
                n_decisions: 10,
                n_models: default_models(),
                seed: base_seed,
            }),
            policies,
            horizon,
            n_runs,
            base_seed,
            output: None,
            fw_steps: default_fw_steps(),
            lambda_grid: default_lambda_grid(),
        }
    }
}

/// One CSV row. Diagnostics a policy does not produce are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: usize,
    pub policy: String,
    pub t: usize,
    pub decision: usize,
    pub instant_regret: f64,
    pub cum_regret: f64,
    pub epsilon_sq: Option<f64>,
    pub lambda: Option<f64>,
    pub dec_value: Option<f64>,
    pub est_increment: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub policy: String,
    pub run_id: usize,
    pub round: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub completed_runs: usize,
    pub mean_final_regret: f64,
    pub std_error: f64,
    pub mean_est: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub traces: Vec<TraceRow>,
    pub summary: Vec<PolicySummary>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentResult {
    pub fn summary_for(&self, policy: &str) -> Option<&PolicySummary> {
        self.summary.iter().find(|s| s.policy == policy)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Stable per-run seed; depends only on the base seed, the policy name and
/// the run index.
pub fn derive_seed(base_seed: u64, policy: &str, run_id: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(fnv1a64(policy.as_bytes()) ^ splitmix64(run_id as u64)))
}

struct RunOutput {
    rows: Vec<TraceRow>,
    failure: Option<RunFailure>,
}

fn est_increment(problem: &Problem, estimate: &Estimate, mu: &crate::simplex::SimplexVector) -> Result<f64> {
    let div = match (problem, estimate) {
        (Problem::Finite(p), Estimate::Finite(g)) => finite_divergences(&p.instance, *g, p.f_star),
        (Problem::Linear(p), Estimate::Linear(x)) => linear_divergences(&p.instance, x, &p.f_star()),
        _ => return Err(E2dError::InvalidParameter("estimate does not match the instance kind".into())),
    };
    crate::estimation::est_increment(mu, &div)
}

fn execute_run(
    problem: &Problem,
    policy: &PolicyConfig,
    run_id: usize,
    horizon: usize,
    base_seed: u64,
    settings: &SolverSettings,
) -> RunOutput {
    let seed = derive_seed(base_seed, &policy.name, run_id);
    let mut rows = Vec::with_capacity(horizon);
    let fail = |round: usize, e: E2dError| RunFailure {
        policy: policy.name.clone(),
        run_id,
        round,
        message: E2dError::Round { round, source: Box::new(e) }.to_string(),
    };
    let mut agent = match build_policy(&policy.policy, problem, settings) {
        Ok(a) => a,
        Err(e) => return RunOutput { rows, failure: Some(fail(0, e)) },
    };
    let mut rng = RngStream::new(seed);
    let mut cum = 0.0;
    for t in 1..=horizon {
        let step = match agent.decide(t, &mut rng) {
            Ok(s) => s,
            Err(e) => return RunOutput { rows, failure: Some(fail(t, e)) },
        };
        if step.decision >= problem.n_decisions() {
            let e = E2dError::IndexOutOfRange { what: "decision", index: step.decision, size: problem.n_decisions() };
            return RunOutput { rows, failure: Some(fail(t, e)) };
        }
        let inc = match est_increment(problem, &step.estimate, &step.mu) {
            Ok(v) => v,
            Err(e) => return RunOutput { rows, failure: Some(fail(t, e)) },
        };
        let y = problem.sample_observation(step.decision, &mut rng);
        let regret = problem.instant_regret(step.decision);
        cum += regret;
        rows.push(TraceRow {
            run_id,
            policy: policy.name.clone(),
            t,
            decision: step.decision,
            instant_regret: regret,
            cum_regret: cum,
            epsilon_sq: step.epsilon_sq,
            lambda: step.lambda,
            dec_value: step.dec_value,
            est_increment: inc,
            seed,
        });
        if let Err(e) = agent.observe(step.decision, &y) {
            return RunOutput { rows, failure: Some(fail(t, e)) };
        }
    }
    RunOutput { rows, failure: None }
}

/// Runs every `(policy, run)` pair on a pool of `jobs` workers (0 means one
/// per core). Output order does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    config.validate()?;
    let problem = config.resolve_problem()?;
    let settings = SolverSettings {
        fw: FwOptions::with_steps(config.fw_steps),
        lambda_grid: config.lambda_grid,
    };
    let tasks: Vec<(usize, usize)> =
        (0..config.policies.len()).flat_map(|p| (0..config.n_runs).map(move |r| (p, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| E2dError::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, r)| execute_run(&problem, &config.policies[p], r, config.horizon, config.base_seed, &settings))
            .collect()
    });

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for out in outputs {
        traces.extend(out.rows);
        failures.extend(out.failure);
    }
    sort_traces(&mut traces);
    failures.sort_by(|a, b| (&a.policy, a.run_id).cmp(&(&b.policy, b.run_id)));

    let summary = config
        .policies
        .iter()
        .map(|p| summarize(&p.name, &traces, &failures, config.horizon))
        .collect();
    Ok(ExperimentResult { traces, summary, failures })
}

fn sort_traces(rows: &mut [TraceRow]) {
    rows.sort_by(|a, b| (&a.policy, a.run_id, a.t).cmp(&(&b.policy, b.run_id, b.t)));
}

fn summarize(policy: &str, traces: &[TraceRow], failures: &[RunFailure], horizon: usize) -> PolicySummary {
    let mut per_run: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for row in traces.iter().filter(|r| r.policy == policy) {
        let entry = per_run.entry(row.run_id).or_insert((f64::NAN, 0.0));
        entry.1 += row.est_increment;
        if row.t == horizon {
            entry.0 = row.cum_regret;
        }
    }
    for f in failures.iter().filter(|f| f.policy == policy) {
        per_run.remove(&f.run_id);
    }
    let finals: Vec<f64> = per_run.values().map(|v| v.0).collect();
    let ests: Vec<f64> = per_run.values().map(|v| v.1).collect();
    let (mean, se) = mean_and_se(&finals);
    let (mean_est, _) = mean_and_se(&ests);
    PolicySummary { policy: policy.to_string(), completed_runs: finals.len(), mean_final_regret: mean, std_error: se, mean_est }
}

/// Mean and standard error (sample standard deviation over `√n`).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Formats with 9 significant digits, positional for moderate exponents.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

/// Writes traces as CSV, sorted by `(policy, run_id, t)`.
pub fn write_traces<W: Write>(traces: &[TraceRow], writer: W) -> Result<()> {
    let mut sorted = traces.to_vec();
    sort_traces(&mut sorted);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in &sorted {
        w.write_record([
            r.run_id.to_string(),
            r.policy.clone(),
            r.t.to_string(),
            r.decision.to_string(),
            format_sig9(r.instant_regret),
            format_sig9(r.cum_regret),
            opt(r.epsilon_sq),
            opt(r.lambda),
            opt(r.dec_value),
            format_sig9(r.est_increment),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces_to_path(traces: &[TraceRow], path: &Path) -> Result<()> {
    write_traces(traces, File::create(path)?)
}

/// Reads a trace CSV, rejecting any header other than the expected one.
pub fn read_traces<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(E2dError::InvalidParameter(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}
