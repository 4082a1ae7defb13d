//! `rfpinn` — command-line driver for the random-feature PDE toolkit.
//!
//! Subcommands:
//! - `sample`: draw a frozen feature bank and dump it as CSV.
//! - `approx`: approximation-rate sweep (forces `experiment = "approx_rate"`).
//! - `solve`:  scheduled PDE solves (forces `experiment = "solve"`).
//! - `sweep`:  run whichever experiment the config names.
//! - `slope`:  median-aggregated log-log slope of two CSV columns.
//!
//! Every run emits CSV plus a `run_manifest.toml` echoing the resolved
//! configuration. Successful commands print a one-line JSON summary to
//! stdout; failures print a machine-readable JSON error record to stderr
//! and exit nonzero.

use clap::{Args, Parser, Subcommand};
use rfpinn::{
    fit_loglog_slope, median_curve, run_experiment, sample, write_manifest, Error, PriorSpec,
    Result, RunConfig,
};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "rfpinn",
    version,
    about = "Random-feature solvers for second-order elliptic PDEs",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a frozen feature bank from the configured prior and write it as CSV
    Sample(RunArgs),
    /// Sobolev approximation-rate sweep (forces experiment = "approx_rate")
    Approx(RunArgs),
    /// Scheduled PDE solves with summary metrics (forces experiment = "solve")
    Solve(RunArgs),
    /// Run the experiment named in the config (loss_decay, approx_rate, or solve)
    Sweep(RunArgs),
    /// Fit a power law: median-aggregate a CSV column and report the log-log slope
    Slope(SlopeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR", default_value = "rfpinn-out")]
    out: PathBuf,
    /// Override the config's base seed
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for feature sampling (default: all cores)
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
    /// Force fully sequential execution (implies --threads 1)
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct SlopeArgs {
    /// Input CSV file
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Column fitted on the horizontal (log) axis
    #[arg(long, value_name = "COLUMN", default_value = "m")]
    x: String,
    /// Column fitted on the vertical (log) axis
    #[arg(long, value_name = "COLUMN", default_value = "test_loss")]
    y: String,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        let record = json!({
            "error": { "class": err.class(), "message": err.to_string() }
        });
        eprintln!("{record}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => run_sample(&args),
        Command::Approx(args) => run_sweep(&args, "approx", Some("approx_rate")),
        Command::Solve(args) => run_sweep(&args, "solve", Some("solve")),
        Command::Sweep(args) => run_sweep(&args, "sweep", None),
        Command::Slope(args) => run_slope(&args),
    }
}

/// Applies the shared flags: thread-pool size and seed override.
fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let workers = if args.deterministic {
        Some(1)
    } else {
        args.threads
    };
    if let Some(k) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.grid.base_seed = seed;
    }
    Ok(config)
}

fn prior_from(config: &RunConfig, d: usize) -> Result<PriorSpec> {
    match config.prior.family.as_str() {
        "compact" => PriorSpec::compact(config.prior.cutoff, d),
        "heavytail" => PriorSpec::heavy_tail(config.prior.alpha, config.prior.beta, d),
        other => Err(Error::Config(format!(
            "unknown prior family '{other}' (known: compact, heavytail)"
        ))),
    }
}

fn run_sample(args: &RunArgs) -> Result<()> {
    let config = resolve(args)?;
    let d = config.problem.d;
    let prior = prior_from(&config, d)?;
    let m = config.grid.m.first().copied().unwrap_or(1000);
    let seed = config.grid.base_seed;
    let started = Instant::now();
    let bank = sample(&prior, m, seed)?;
    std::fs::create_dir_all(&args.out)?;
    let bank_path = args.out.join("feature_bank.csv");
    bank.write_csv(&bank_path)?;
    let manifest_path = write_manifest(&config, &args.out)?;
    println!(
        "{}",
        json!({
            "command": "sample",
            "prior": prior.to_string(),
            "m": m,
            "d": d,
            "seed": seed,
            "bank": display_path(&bank_path),
            "manifest": display_path(&manifest_path),
            "elapsed_secs": started.elapsed().as_secs_f64(),
        })
    );
    Ok(())
}

fn run_sweep(args: &RunArgs, command: &str, force_experiment: Option<&str>) -> Result<()> {
    let mut config = resolve(args)?;
    if let Some(name) = force_experiment {
        config.experiment = name.to_string();
    }
    let started = Instant::now();
    let output = run_experiment(&config, &args.out)?;
    println!(
        "{}",
        json!({
            "command": command,
            "experiment": config.experiment,
            "csv": display_path(&output.csv_path),
            "manifest": display_path(&output.manifest_path),
            "traces": output.trace_paths.iter().map(|p| display_path(p)).collect::<Vec<_>>(),
            "rows": output.rows,
            "failed_cells": output.failed_cells,
            "elapsed_secs": started.elapsed().as_secs_f64(),
        })
    );
    Ok(())
}

fn run_slope(args: &SlopeArgs) -> Result<()> {
    let points = numeric_pairs(&args.input, &args.x, &args.y)?;
    let curve = median_curve(&points)?;
    let fit = fit_loglog_slope(&curve)?;
    println!(
        "{}",
        json!({
            "command": "slope",
            "input": display_path(&args.input),
            "x": args.x,
            "y": args.y,
            "rows": points.len(),
            "medians": curve.len(),
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
        })
    );
    Ok(())
}

/// Numeric (x, y) pairs from two named CSV columns, skipping rows whose
/// `error` column (when present) is non-empty.
fn numeric_pairs(path: &Path, x_col: &str, y_col: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("CSV has no '{name}' column: {headers:?}")))
    };
    let xi = position(x_col)?;
    let yi = position(y_col)?;
    let err_i = headers.iter().position(|h| h == "error");
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        if let Some(e) = err_i {
            if !record[e].is_empty() {
                continue;
            }
        }
        let x: f64 = record[xi].parse().map_err(|_| {
            Error::Data(format!("column '{x_col}' holds non-numeric value '{}'", &record[xi]))
        })?;
        let y: f64 = record[yi].parse().map_err(|_| {
            Error::Data(format!("column '{y_col}' holds non-numeric value '{}'", &record[yi]))
        })?;
        out.push((x, y));
    }
    if out.is_empty() {
        return Err(Error::Data(format!(
            "no usable rows with numeric '{x_col}' and '{y_col}' columns"
        )));
    }
    Ok(out)
}

fn display_path(path: &Path) -> String {
    path.display().to_string()
}
