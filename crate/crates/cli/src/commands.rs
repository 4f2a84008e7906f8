//! Command implementations. Every command writes its human-readable report
//! to the given writer and its artifacts under the output directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use tdcr_core::control::SlackStrategy;
use tdcr_core::evaluation::{
    compare_slack_strategies, evaluate_run, max_deviation, EvaluationError, GainSource, RunMetrics, Trajectory,
};
use tdcr_core::learning::{
    ddpg_train_with, Environment, Policy, PolicySnapshot, TrainOutcome, SNAPSHOT_FORMAT_VERSION,
};

use crate::checks::{run_all, CheckSizes};
use crate::config::WorkbenchConfig;
use crate::BenchError;

/// Episodes between progress lines during training.
const PROGRESS_INTERVAL: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "tdcr-bench", version, about = "Tendon-driven continuum robot workbench")]
pub struct Cli {
    /// JSON configuration file; defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set train.episodes=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for every random draw; replaces the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kinematics, Jacobian, null-space and gradient self-checks.
    Validate {
        /// Reduced sample counts.
        #[arg(long)]
        quick: bool,
    },
    /// Track the configured trajectory once per slack strategy.
    TensionStrategies {
        /// Comma-separated subset of the configured strategies, by name.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Train a gain policy with DDPG.
    Train,
    /// Fixed-gain baseline, and the policy when a snapshot is given.
    Eval {
        /// Policy snapshot written by `train`.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
        /// circle or lemniscate; the configured trajectory when absent.
        #[arg(long)]
        trajectory: Option<String>,
    },
}

impl Cli {
    /// Loads the configuration with `--seed` and `--out` applied last.
    pub fn load_config(&self) -> Result<WorkbenchConfig, BenchError> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", serde_json::Value::String(out.display().to_string())));
        }
        WorkbenchConfig::load(self.config.as_deref(), &overrides)
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), BenchError> {
    let config = cli.load_config()?;
    match &cli.command {
        Command::Validate { quick } => validate(&config, *quick, out),
        Command::TensionStrategies { strategies } => tension_strategies(&config, strategies, out),
        Command::Train => train(&config, out),
        Command::Eval { snapshot, trajectory } => eval(&config, snapshot.as_deref(), trajectory.as_deref(), out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, BenchError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(path)
}

fn report(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), BenchError> {
    writeln!(out, "{line}").map_err(io_err(Path::new("<output>")))
}

pub fn validate(config: &WorkbenchConfig, quick: bool, out: &mut dyn Write) -> Result<(), BenchError> {
    let sizes = if quick { CheckSizes::QUICK } else { CheckSizes::FULL };
    let results = run_all(&config.geometry, config.train.hidden_width, sizes, config.seed)?;
    report(out, format_args!("{:<42} {:>8} {:>12} {:>10}  status", "check", "samples", "worst", "tolerance"))?;
    for r in &results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        report(
            out,
            format_args!("{:<42} {:>8} {:>12.3e} {:>10.0e}  {status}", r.name, r.samples, r.worst, r.tolerance),
        )?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(BenchError::CheckFailed(format!("checks out of tolerance: {}", failed.join(", "))))
    }
}

#[derive(Debug, Serialize)]
struct StrategyRow {
    strategy: SlackStrategy,
    metrics: Option<RunMetrics>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct StrategyReport {
    trajectory: Trajectory,
    duration: f64,
    rows: Vec<StrategyRow>,
    /// Largest pairwise tip-trajectory distance among completed runs (m).
    max_trajectory_deviation: Option<f64>,
}

pub fn tension_strategies(config: &WorkbenchConfig, names: &[String], out: &mut dyn Write) -> Result<(), BenchError> {
    let selected: Vec<SlackStrategy> = if names.is_empty() {
        config.strategies.clone()
    } else {
        let mut chosen = Vec::new();
        for name in names {
            let s = config.strategies.iter().find(|s| s.name() == name).ok_or_else(|| {
                let valid: Vec<&str> = config.strategies.iter().map(|s| s.name()).collect();
                BenchError::Config(format!(
                    "unknown strategy `{name}`; configured strategies are: {}",
                    valid.join(", ")
                ))
            })?;
            chosen.push(*s);
        }
        chosen
    };
    let closed_loop = config.closed_loop()?;
    let duration = config.eval_duration_for(&config.trajectory);
    let runs = compare_slack_strategies(
        &closed_loop.plant,
        &closed_loop.controller,
        &selected,
        &config.trajectory,
        config.baseline_gains(),
        duration,
    );

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut any_failed = false;
    report(out, format_args!("{:<24} {:>14} {:>12} {:>12}", "strategy", "max tension N", "rmse m", "saturated"))?;
    for run in runs {
        let name = run.strategy.name();
        match run.result {
            Ok(result) if result.metrics.failure.is_none() => {
                write_file(&config.output_dir, &format!("tensions_{name}.csv"), &result.csv)?;
                let m = &result.metrics;
                report(
                    out,
                    format_args!("{name:<24} {:>14.4} {:>12.4e} {:>12}", m.max_tension, m.rmse, m.saturation_count),
                )?;
                traces.push(result.positions);
                rows.push(StrategyRow { strategy: run.strategy, metrics: Some(result.metrics), error: None });
            }
            Ok(result) => {
                any_failed = true;
                let reason = result.metrics.failure.clone().unwrap_or_default();
                report(out, format_args!("{name:<24} failed after {} steps: {reason}", result.metrics.steps))?;
                rows.push(StrategyRow { strategy: run.strategy, metrics: Some(result.metrics), error: Some(reason) });
            }
            Err(e) => {
                any_failed = true;
                report(out, format_args!("{name:<24} failed: {e}"))?;
                rows.push(StrategyRow { strategy: run.strategy, metrics: None, error: Some(e.to_string()) });
            }
        }
    }
    let mut deviation: Option<f64> = None;
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            if let Some(d) = max_deviation(&traces[i], &traces[j]) {
                deviation = Some(deviation.map_or(d, |v| v.max(d)));
            }
        }
    }
    if let Some(d) = deviation {
        report(out, format_args!("max trajectory deviation between strategies: {d:.3e} m"))?;
    }
    let summary = StrategyReport { trajectory: config.trajectory, duration, rows, max_trajectory_deviation: deviation };
    write_file(&config.output_dir, "strategies.json", &to_json(&summary))?;
    if any_failed {
        Err(BenchError::CheckFailed("some strategies failed; see the report".into()))
    } else {
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub snapshot_format_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub episodes_completed: usize,
    pub config: &'a WorkbenchConfig,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn train(config: &WorkbenchConfig, out: &mut dyn Write) -> Result<(), BenchError> {
    let train_config = config.train_config();
    let closed_loop = config.closed_loop()?;
    let hash = config.hash();
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut progress = Vec::new();
    let result = ddpg_train_with(&train_config, closed_loop.clone(), |r| {
        if r.episode % PROGRESS_INTERVAL == 0 || r.episode + 1 == train_config.episodes {
            progress.push(format!(
                "episode {:>5}  steps {:>4}  return {:>12.5}  running mean {:>12.5}  Q0 {:>10.4}",
                r.episode, r.steps, r.discounted_return, r.running_mean_return, r.critic_value_at_start
            ));
        }
    });
    for line in &progress {
        report(out, format_args!("{line}"))?;
    }
    let manifest = |episodes_completed| Manifest {
        command: "train",
        tool_version: env!("CARGO_PKG_VERSION"),
        snapshot_format_version: SNAPSHOT_FORMAT_VERSION,
        seed: config.seed,
        config_hash: hash.clone(),
        episodes_completed,
        config,
    };
    let TrainOutcome { agent, log } = match result {
        Ok(outcome) => outcome,
        Err(failure) => {
            write_file(dir, "training_log.csv", &failure.log.to_csv())?;
            write_file(dir, "manifest.json", &to_json(&manifest(failure.log.episodes.len())))?;
            report(
                out,
                format_args!("partial log of {} episodes written to {}", failure.log.episodes.len(), dir.display()),
            )?;
            return Err(failure.error.into());
        }
    };
    let env = Environment::new(closed_loop, train_config.env.clone(), train_config.gain_ranges)?;
    let policy = Policy::new(agent.actor, train_config.gain_ranges, env.scaling)?;
    let snapshot = PolicySnapshot::from_policy(&policy, config.seed, hash.clone());
    write_file(dir, "snapshot.json", &snapshot.to_json()?)?;
    write_file(dir, "training_log.csv", &log.to_csv())?;
    write_file(dir, "manifest.json", &to_json(&manifest(log.episodes.len())))?;
    report(out, format_args!("snapshot, training log and manifest written to {}", dir.display()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    trajectory: Trajectory,
    duration: f64,
    baseline: RunMetrics,
    policy: Option<RunMetrics>,
}

/// `name` selects the trajectory; the configured one keeps its options when
/// the names agree.
fn select_trajectory(config: &WorkbenchConfig, name: Option<&str>) -> Result<Trajectory, BenchError> {
    match name {
        None => Ok(config.trajectory),
        Some(n) if n == config.trajectory.name() => Ok(config.trajectory),
        Some(n) => Trajectory::from_name(n).map_err(|e| match e {
            EvaluationError::UnknownTrajectory(_) => BenchError::Config(e.to_string()),
            other => other.into(),
        }),
    }
}

pub fn eval(
    config: &WorkbenchConfig,
    snapshot: Option<&Path>,
    trajectory: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), BenchError> {
    let trajectory = select_trajectory(config, trajectory)?;
    let policy = match snapshot {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let snap = PolicySnapshot::from_json(&text).map_err(BenchError::Snapshot)?;
            Some(snap.to_policy().map_err(BenchError::Snapshot)?)
        }
        None => None,
    };
    let closed_loop = config.closed_loop()?;
    let duration = config.eval_duration_for(&trajectory);
    let name = trajectory.name();
    let dir = &config.output_dir;

    let baseline = evaluate_run(&closed_loop, &trajectory, GainSource::Fixed(config.baseline_gains()), duration)?;
    write_file(dir, &format!("eval_{name}_baseline.csv"), &baseline.csv)?;
    let policy_run = match &policy {
        Some(p) => {
            let run = evaluate_run(&closed_loop, &trajectory, GainSource::Policy(p), duration)?;
            write_file(dir, &format!("eval_{name}_policy.csv"), &run.csv)?;
            Some(run)
        }
        None => None,
    };

    report(
        out,
        format_args!(
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>14}",
            "mode", "rmse m", "rmse x", "rmse y", "rmse z", "max tension N"
        ),
    )?;
    for (mode, run) in std::iter::once(("baseline", &baseline)).chain(policy_run.as_ref().map(|r| ("policy", r))) {
        let m = &run.metrics;
        report(
            out,
            format_args!(
                "{mode:<10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>14.4}",
                m.rmse, m.rmse_per_axis[0], m.rmse_per_axis[1], m.rmse_per_axis[2], m.max_tension
            ),
        )?;
        if let Some(f) = &m.failure {
            report(out, format_args!("{mode}: plant failure after {} steps: {f}", m.steps))?;
        }
    }
    if let Some(p) = &policy_run {
        let improvement = 100.0 * (1.0 - p.metrics.rmse / baseline.metrics.rmse);
        report(out, format_args!("rmse improvement over the baseline: {improvement:.1}%"))?;
    }
    let summary =
        EvalReport { trajectory, duration, baseline: baseline.metrics, policy: policy_run.map(|r| r.metrics) };
    write_file(dir, &format!("eval_{name}_metrics.json"), &to_json(&summary))?;
    Ok(())
}
