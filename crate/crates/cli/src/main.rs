//! `e2d`: solve decision-estimation coefficients, generate instances and run
//! bandit experiments from the command line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use e2d_core::dec::{dec_ac, dec_ac_shifted, dec_constrained_oracle, dec_offset, pac_dec, DecSolution, LambdaSearch};
use e2d_core::harness::{
    generate_problem, run_experiment, write_traces_to_path, ExperimentConfig, GenerateSpec, InstanceKind, Preset,
};
use e2d_core::linear_dec::{FwOptions, LinearDecSolver};
use e2d_core::model::{gap_matrix, info_matrix, shifted_gap_matrix, FiniteInstance, LinearInstance};

#[derive(Parser)]
#[command(name = "e2d", version, about = "Decision-estimation coefficients and E2D bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecMode {
    Offset,
    Ac,
    AcShifted,
    Pac,
    ConstrainedOracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Mab,
    Linear,
    Revealing,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Exp1,
    Exp2,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a DEC variant on a finite instance; prints the solution as JSON.
    Dec {
        /// Finite instance JSON.
        instance: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Multiplier for `offset` mode.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "ac")]
        mode: DecMode,
        /// λ grid points (μ-grid divisions for `constrained-oracle`).
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Reference model index; defaults to the file's `f_star`, else 0.
        #[arg(long)]
        reference: Option<usize>,
    },
    /// Solve the linear DEC by Frank–Wolfe; prints the solution as JSON.
    DecLinear {
        /// Linear instance JSON.
        instance: PathBuf,
        /// Comma-separated estimate, one entry per dimension.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        fhat: Vec<f64>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        fw_steps: usize,
        #[arg(long, default_value_t = 50)]
        lambda_grid: usize,
    },
    /// Generate a random instance (with its true model) as JSON.
    GenInstance {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        n_decisions: usize,
        /// Model count for `mab`.
        #[arg(long, default_value_t = 8)]
        n_models: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment and write the regret traces as CSV.
    Run {
        #[arg(long, required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "config")]
        preset: Option<PresetArg>,
        /// Worker threads (0 uses every core).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CSV path; overrides the config's `output`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the number of runs per policy.
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed for presets.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn require_epsilon(epsilon: Option<f64>) -> Result<f64> {
    epsilon.context("--epsilon is required for this mode")
}

fn cmd_dec(
    path: &Path,
    epsilon: Option<f64>,
    lambda: Option<f64>,
    mode: DecMode,
    grid: usize,
    reference: Option<usize>,
) -> Result<()> {
    let doc = read_json(path)?;
    let f = match reference {
        Some(f) => f,
        None => doc.get("f_star").and_then(|v| v.as_u64()).map_or(0, |v| v as usize),
    };
    let inst: FiniteInstance = serde_json::from_value(doc).context("not a finite instance")?;
    let info = info_matrix(&inst, f)?;
    let search = LambdaSearch { grid_size: grid, ..LambdaSearch::default() };
    let solution = match mode {
        DecMode::Offset => {
            let lambda = lambda.context("--lambda is required for offset mode")?;
            let s = dec_offset(&gap_matrix(&inst), &info, lambda)?;
            DecSolution { value: s.value, mu: s.mu, lambda_star: lambda, adversary: Some(s.adversary) }
        }
        DecMode::Ac => dec_ac(&gap_matrix(&inst), &info, require_epsilon(epsilon)?, &search)?,
        DecMode::AcShifted => dec_ac_shifted(&shifted_gap_matrix(&inst, f)?, &info, require_epsilon(epsilon)?, &search)?,
        DecMode::Pac => pac_dec(&inst.optimal_value_gaps(f)?, &info, require_epsilon(epsilon)?, &search)?,
        DecMode::ConstrainedOracle => {
            if grid == 0 {
                bail!("--grid must be positive");
            }
            let value = dec_constrained_oracle(&gap_matrix(&inst), &info, require_epsilon(epsilon)?, 1.0 / grid as f64)?;
            return print_json(&serde_json::json!({ "value": value }));
        }
    };
    print_json(&solution)
}

fn cmd_dec_linear(path: &Path, fhat: &[f64], epsilon: f64, fw_steps: usize, lambda_grid: usize) -> Result<()> {
    let inst: LinearInstance = serde_json::from_value(read_json(path)?).context("not a linear instance")?;
    if fhat.len() != inst.dim() {
        bail!("--fhat has {} entries but the instance has dimension {}", fhat.len(), inst.dim());
    }
    let solver = LinearDecSolver::new(&inst);
    let opts = FwOptions::with_steps(fw_steps);
    let solution = solver.solve(&DVector::from_column_slice(fhat), epsilon, &opts, lambda_grid, None)?;
    print_json(&solution)
}

fn cmd_gen(spec: GenerateSpec, output: Option<&Path>) -> Result<()> {
    let problem = generate_problem(&spec)?;
    match output {
        Some(p) => fs::write(p, serde_json::to_string_pretty(&problem)? + "\n")
            .with_context(|| format!("writing {}", p.display())),
        None => print_json(&problem),
    }
}

fn cmd_run(
    config: Option<&Path>,
    preset: Option<PresetArg>,
    jobs: usize,
    output: Option<PathBuf>,
    runs: Option<usize>,
    seed: u64,
) -> Result<bool> {
    let mut cfg = match (config, preset) {
        (Some(path), _) => ExperimentConfig::from_json_file(path)?,
        (None, Some(PresetArg::Exp1)) => Preset::Exp1.config(seed),
        (None, Some(PresetArg::Exp2)) => Preset::Exp2.config(seed),
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(r) = runs {
        cfg.n_runs = r;
    }
    let out = output.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("traces.csv"));
    let result = run_experiment(&cfg, jobs)?;
    write_traces_to_path(&result.traces, &out).with_context(|| format!("writing {}", out.display()))?;

    let summary_path = out.with_extension("summary.json");
    let meta = serde_json::json!({ "config": cfg, "summary": result.summary, "failures": result.failures });
    fs::write(&summary_path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;

    for s in &result.summary {
        eprintln!(
            "{:<28} final regret {:>10.3} ± {:<8.3} ({} runs)",
            s.policy, s.mean_final_regret, s.std_error, s.completed_runs
        );
    }
    for f in &result.failures {
        eprintln!("run failed: policy {} run {}: {}", f.policy, f.run_id, f.message);
    }
    Ok(result.failures.is_empty())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Dec { instance, epsilon, lambda, mode, grid, reference } => {
            cmd_dec(&instance, epsilon, lambda, mode, grid, reference)?
        }
        Command::DecLinear { instance, fhat, epsilon, fw_steps, lambda_grid } => {
            cmd_dec_linear(&instance, &fhat, epsilon, fw_steps, lambda_grid)?
        }
        Command::GenInstance { d, n_decisions, n_models, seed, kind, output } => {
            let kind = match kind {
                Kind::Mab => InstanceKind::Mab,
                Kind::Linear => InstanceKind::Linear,
                Kind::Revealing => InstanceKind::Revealing,
            };
            cmd_gen(GenerateSpec { kind, d, n_decisions, n_models, seed }, output.as_deref())?
        }
        Command::Run { config, preset, jobs, output, runs, seed } => {
            return cmd_run(config.as_deref(), preset, jobs, output, runs, seed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
