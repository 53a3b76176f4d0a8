//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical consistency
//! failure, 1 anything else.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{constants, cov_sum_limit, CovSumLimit};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::estimators::{decompose_var_error, delta_method_terms, linearization_terms, sharpe_hat, v_decomposition};
use crate::model::{sigma_y_squared, true_sharpe, Truncation};
use crate::montecarlo::{estimate_rate, mean_contribution, normality_check, variance_match, McReport};
use crate::simulate::Simulator;
use crate::TOOL_VERSION;

/// Grid for the covariance-summation check of `constants --cov-sum`.
pub const COV_SUM_GRID: [usize; 5] = [10_000, 30_000, 100_000, 300_000, 1_000_000];
/// Relative agreement required between the covariance-summation limit and ξ².
pub const COV_SUM_TOL: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(name = "lmsv", version, about = "Sharpe-ratio estimation under (long-memory) stochastic volatility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config field, e.g. `--set model.a.beta=0.6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for Monte Carlo commands.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed override (path seed or Monte Carlo master seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    /// Also write per-replication rows as CSV.
    #[arg(long)]
    rows: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Limiting-variance constants of the model.
    Constants {
        #[command(flatten)]
        common: Common,
        /// Also run the covariance-summation oracle for ξ² (long memory only).
        #[arg(long)]
        cov_sum: bool,
    },
    /// Simulate one path and write it as CSV (t,x,v,r,y).
    Simulate(Common),
    /// Simulate one path and report the estimators and error decompositions.
    Estimate(Common),
    /// Log-log regression of the error sd on n.
    McRate(McArgs),
    /// KS distance, skewness and kurtosis of standardized errors at the largest n.
    McNormality(McArgs),
    /// Empirical over theoretical limit variance per n.
    McVariance(McArgs),
    /// Share of the mean term in the error variance per n.
    McMeanShare(McArgs),
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidSpec { .. } | Error::Config(_) | Error::Domain(_) => 2,
        Error::Consistency(_) => 3,
        _ => 1,
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main_exit() -> i32 {
    run_cli(std::env::args_os())
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Provenance block shared by every output.
fn envelope(command: &str, common: &Common, config: &ExperimentConfig) -> serde_json::Value {
    json!({
        "command": command,
        "tool_version": TOOL_VERSION,
        "config_path": common.config,
        "overrides": common.set,
        "config": config,
    })
}

fn with_result<T: Serialize>(mut env: serde_json::Value, result: &T) -> Result<serde_json::Value> {
    env["result"] = serde_json::to_value(result)?;
    Ok(env)
}

/// Keeps regime-specific quantities optional.
fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoClosedForm(_) | Error::NotApplicable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Constants { common, cov_sum } => run_constants(&common, cov_sum),
        Command::Simulate(common) => run_simulate(&common),
        Command::Estimate(common) => run_estimate(&common),
        Command::McRate(a) => run_mc("mc-rate", &a, estimate_rate),
        Command::McNormality(a) => run_mc("mc-normality", &a, normality_check),
        Command::McVariance(a) => run_mc("mc-variance", &a, variance_match),
        Command::McMeanShare(a) => run_mc("mc-mean-share", &a, mean_contribution),
    }
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::load(&common.config, &common.set)
}

fn run_constants(common: &Common, with_cov_sum: bool) -> Result<()> {
    let config = load(common)?;
    let trunc = match &config.sim {
        Some(sim) if sim.n > 0 => config.sim_config(common.seed)?.resolve(&config.model)?.truncation(),
        _ => Truncation::NONE,
    };
    let consts = constants(&config.model, trunc)?;
    let cov_sum: Option<CovSumLimit> = if with_cov_sum {
        let limit = cov_sum_limit(&config.model.a, &COV_SUM_GRID)?;
        let xi2 = consts.xi2.expect("long-memory constants carry xi2");
        if ((limit.extrapolated - xi2) / xi2).abs() > COV_SUM_TOL {
            return Err(Error::Consistency(format!(
                "covariance summation gives {} against closed-form xi^2 {xi2}",
                limit.extrapolated
            )));
        }
        Some(limit)
    } else {
        None
    };
    let result = json!({ "truncation": trunc, "constants": consts, "cov_sum": cov_sum });
    write_json(common.out.as_deref(), &with_result(envelope("constants", common, &config), &result)?)
}

fn run_simulate(common: &Common) -> Result<()> {
    let config = load(common)?;
    let sim = config.sim_config(common.seed)?;
    let simulator = Simulator::new(&config.model, &sim)?;
    let path = simulator.simulate(sim.seed)?;
    let mut out = open_out(common.out.as_deref())?;
    path.write_csv(&mut out)?;
    out.flush()?;
    if let Some(p) = &common.out {
        let meta = json!({
            "resolved": simulator.resolved(),
            "spec_digest": path.spec_digest,
            "seed": path.seed,
        });
        write_json(Some(&sidecar(p)), &with_result(envelope("simulate", common, &config), &meta)?)?;
    }
    Ok(())
}

fn run_estimate(common: &Common) -> Result<()> {
    let config = load(common)?;
    let sim = config.sim_config(common.seed)?;
    let simulator = Simulator::new(&config.model, &sim)?;
    let path = simulator.simulate(sim.seed)?;
    let spec = &config.model;
    let trunc = simulator.truncation();
    let est_y = sharpe_hat(&path.y, spec.r_f)?;
    let est_r = sharpe_hat(&path.r, spec.r_f)?;
    let sigma_y2 = optional(sigma_y_squared(spec, trunc))?;
    let result = json!({
        "resolved": simulator.resolved(),
        "spec_digest": path.spec_digest,
        "filtered": est_y,
        "raw": est_r,
        "sr_true": optional(true_sharpe(spec, trunc))?,
        "sigma_y2": sigma_y2,
        "delta_method": sigma_y2.map(|s| delta_method_terms(&est_y, s, spec.r_f)),
        "var_error_decomposition": optional(decompose_var_error(&path, spec))?,
        "v_decomposition": optional(v_decomposition(&path, spec))?,
        "linearization": optional(linearization_terms(&path, spec))?,
    });
    write_json(common.out.as_deref(), &with_result(envelope("estimate", common, &config), &result)?)
}

fn run_mc(name: &str, args: &McArgs, run: fn(&crate::montecarlo::McConfig) -> Result<McReport>) -> Result<()> {
    let common = &args.common;
    let config = load(common)?;
    let mc = config.mc_config(common.workers, common.seed)?;
    let report = run(&mc)?;
    let env = envelope(name, common, &config);
    if let Some(rows) = &args.rows {
        report.write_rows_csv(BufWriter::new(File::create(rows)?))?;
        let meta = json!({ "rows": report.rows.len(), "flagged": report.summary.flagged });
        write_json(Some(&sidecar(rows)), &with_result(env.clone(), &meta)?)?;
    }
    write_json(common.out.as_deref(), &with_result(env, &report.summary)?)
}
