//! Reproducible experiment drivers: TOML-configured sweeps that draw
//! feature banks, assemble and solve the collocation objective or the
//! direct approximation problem, and emit CSV rows tagged with full
//! provenance (`seed,m,n,M,lambda,activation,schedule,build_id,...`)
//! plus a run manifest echoing the configuration.
//!
//! All randomness is derived from `(base_seed, replicate index, cell
//! salts)`, so reruns of the same config are byte-identical except for
//! the `unix_time` column (and wall-clock columns in solver output).

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::pinn::{
    assemble, empirical_loss, estimate_test_loss, relative_l2_error, sample_collocation,
    EllipticProblem,
};
use crate::quad::QuadratureGrid;
use crate::representation::{coefficients_compact, coefficients_heavytail, sobolev_error};
use crate::sampling::{sample, PriorSpec};
use crate::solvers::{
    pgd, pgd_schedule, ridge, ridge_schedule, PgdConfig, Schedule, StepRule,
};
use crate::targets::BarronTarget;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Seed used for the fixed Monte-Carlo evaluation grid in d >= 3.
const EVALUATION_GRID_SEED: u64 = 0xA11CE;

fn default_problem_name() -> String {
    "poisson1d".to_string()
}

fn default_target_name() -> String {
    "unit_gaussian".to_string()
}

fn default_activation() -> String {
    "spline34".to_string()
}

fn default_prior_family() -> String {
    "compact".to_string()
}

fn default_cutoff() -> f64 {
    4.0
}

fn default_alpha() -> f64 {
    7.0
}

fn default_beta() -> f64 {
    2.0
}

fn default_seeds() -> usize {
    5
}

fn default_base_seed() -> u64 {
    42
}

fn default_solver_kind() -> String {
    "ridge".to_string()
}

fn default_schedule() -> String {
    "ridge".to_string()
}

fn default_lambda() -> f64 {
    1.0
}

fn default_iterations() -> usize {
    500
}

fn default_iteration_scale() -> f64 {
    1.0
}

fn default_dimension() -> usize {
    1
}

/// PDE selection for the solver experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_problem_name")]
    pub name: String,
    #[serde(default = "default_dimension")]
    pub d: usize,
    /// Constant potential for problems that take one.
    #[serde(default)]
    pub potential: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            name: default_problem_name(),
            d: default_dimension(),
            potential: 0.0,
        }
    }
}

/// Target selection for the approximation experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default = "default_target_name")]
    pub name: String,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            name: default_target_name(),
        }
    }
}

/// Feature-distribution selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// `compact` or `heavytail`.
    #[serde(default = "default_prior_family")]
    pub family: String,
    /// Truncation radius for the compact family.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Weight-decay exponent for the heavy-tailed family.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Bias-decay exponent for the heavy-tailed family.
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            family: default_prior_family(),
            cutoff: default_cutoff(),
            alpha: default_alpha(),
            beta: default_beta(),
        }
    }
}

/// Sweep axes. Empty vectors take experiment-specific defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Feature counts.
    #[serde(default)]
    pub m: Vec<usize>,
    /// Collocation sample sizes.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Truncation radii for approximation sweeps with the compact family.
    #[serde(default)]
    pub cutoffs: Vec<f64>,
    /// Number of replicate seeds.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// First replicate seed; replicates use consecutive values.
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            m: Vec::new(),
            n: Vec::new(),
            cutoffs: Vec::new(),
            seeds: default_seeds(),
            base_seed: default_base_seed(),
        }
    }
}

/// Solver selection and hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// `ridge` (direct) or `pgd` (projected gradient descent).
    #[serde(default = "default_solver_kind")]
    pub kind: String,
    /// `ridge`, `pgd`, or `manual` hyperparameter schedule.
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// Ridge parameter under the manual schedule.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Gradient-step budget under the manual schedule.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Multiplier on the pgd schedule's iteration budget.
    #[serde(default = "default_iteration_scale")]
    pub iteration_scale: f64,
    /// Feasible-ball radius for pgd; 0 derives it from the ridge solution.
    #[serde(default)]
    pub radius: f64,
    /// Test-set size; 0 means ten times the training size.
    #[serde(default)]
    pub n_test: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: default_solver_kind(),
            schedule: default_schedule(),
            lambda: default_lambda(),
            iterations: default_iterations(),
            iteration_scale: default_iteration_scale(),
            radius: 0.0,
            n_test: 0,
        }
    }
}

/// Top-level experiment configuration, read from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `loss_decay`, `approx_rate`, or `solve`.
    pub experiment: String,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default = "default_activation")]
    pub activation: String,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad experiment config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// A minimal config for the given experiment with all defaults.
    pub fn defaults_for(experiment: &str) -> Self {
        Self::from_toml_str(&format!("experiment = \"{experiment}\""))
            .expect("a bare experiment name parses")
    }

    fn activation_kind(&self) -> Result<ActivationKind> {
        ActivationKind::from_str(&self.activation)
    }

    fn replicate_seeds(&self) -> Result<Vec<u64>> {
        if self.grid.seeds == 0 {
            return Err(Error::Config(
                "grid.seeds must request at least one replicate".into(),
            ));
        }
        Ok((0..self.grid.seeds as u64)
            .map(|i| self.grid.base_seed.wrapping_add(i))
            .collect())
    }

    fn prior_spec(&self, d: usize, cutoff_override: Option<f64>) -> Result<PriorSpec> {
        match self.prior.family.as_str() {
            "compact" => PriorSpec::compact(cutoff_override.unwrap_or(self.prior.cutoff), d),
            "heavytail" => PriorSpec::heavy_tail(self.prior.alpha, self.prior.beta, d),
            other => Err(Error::Config(format!(
                "unknown prior family '{other}' (known: compact, heavytail)"
            ))),
        }
    }

    fn is_compact_prior(&self) -> bool {
        self.prior.family == "compact"
    }

    fn n_test_for(&self, n: usize) -> usize {
        if self.solver.n_test == 0 {
            10 * n
        } else {
            self.solver.n_test
        }
    }
}

/// Deterministic seed derivation: one master seed plus a context salt
/// yields independent-looking streams (splitmix64 finalizer).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable fingerprint of the built library version (FNV-1a).
pub fn build_id() -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in concat!("rfpinn-", env!("CARGO_PKG_VERSION")).bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{hash:016x}")
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Median of a non-empty slice (average of the middle pair for even
/// lengths).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "median of an empty collection is undefined".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let k = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[k]
    } else {
        0.5 * (sorted[k - 1] + sorted[k])
    })
}

/// Groups `(x, y)` pairs by exact `x` value and replaces each group's `y`
/// values with their median; output is sorted by `x`.
pub fn median_curve(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite abscissae"));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i].0;
        let mut ys = Vec::new();
        while i < sorted.len() && sorted[i].0 == x {
            ys.push(sorted[i].1);
            i += 1;
        }
        out.push((x, median(&ys)?));
    }
    Ok(out)
}

/// Least-squares fit of `ln y = slope·ln x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits a power law through at least three strictly positive points.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a log-log fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x.is_finite() && y.is_finite() && x > 0.0 && y > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log-log fit requires finite positive points, got ({x}, {y})"
            )));
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &logs {
        sxx += (x - mean_x) * (x - mean_x);
        syy += (y - mean_y) * (y - mean_y);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "log-log fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Reads `(x_col, y_col)` pairs from a CSV file (skipping rows whose
/// `error` column is non-empty or whose fields are missing), aggregates
/// `y` by median at each `x`, and fits a power law.
pub fn slope_from_csv(path: &Path, x_col: &str, y_col: &str) -> Result<LogLogFit> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("CSV has no '{name}' column: {headers:?}")))
    };
    let xi = find(x_col)?;
    let yi = find(y_col)?;
    let err_col = headers.iter().position(|h| h == "error");
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        if let Some(e) = err_col {
            if record.get(e).map(|s| !s.is_empty()).unwrap_or(false) {
                continue;
            }
        }
        let x = record.get(xi).and_then(|s| s.parse::<f64>().ok());
        let y = record.get(yi).and_then(|s| s.parse::<f64>().ok());
        if let (Some(x), Some(y)) = (x, y) {
            points.push((x, y));
        }
    }
    if points.is_empty() {
        return Err(Error::Data(format!(
            "no usable ({x_col}, {y_col}) pairs in {}",
            path.display()
        )));
    }
    fit_loglog_slope(&median_curve(&points)?)
}

/// Quadrature grid used for evaluation metrics: tensor Gauss-Legendre in
/// low dimension, fixed-seed Monte Carlo beyond.
pub fn evaluation_grid(d: usize) -> Result<QuadratureGrid> {
    match d {
        1 => QuadratureGrid::tensor_gauss_legendre(1, 64),
        2 => QuadratureGrid::tensor_gauss_legendre(2, 48),
        3 => QuadratureGrid::tensor_gauss_legendre(3, 12),
        _ => QuadratureGrid::monte_carlo(d, 100_000, EVALUATION_GRID_SEED),
    }
}

/// Where a finished run left its artifacts.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    /// Per-run iteration traces (gradient solvers only).
    pub trace_paths: Vec<PathBuf>,
    pub rows: usize,
    /// Cells that failed and were recorded with an `error` tag instead of
    /// aborting the sweep.
    pub failed_cells: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    build_id: String,
    created_unix: u64,
    experiment: &'a str,
    config: &'a RunConfig,
}

/// Writes `run_manifest.toml` documenting the exact configuration.
pub fn write_manifest(config: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    let manifest = Manifest {
        build_id: build_id(),
        created_unix: unix_now(),
        experiment: &config.experiment,
        config,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize the run manifest: {e}")))?;
    let path = out_dir.join("run_manifest.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}

const PROVENANCE_HEADER: [&str; 10] = [
    "seed",
    "m",
    "n",
    "M",
    "lambda",
    "activation",
    "schedule",
    "build_id",
    "unix_time",
    "error",
];

struct Provenance<'a> {
    seed: u64,
    m: usize,
    n: Option<usize>,
    cutoff: Option<f64>,
    lambda: Option<f64>,
    activation: &'a str,
    schedule: &'a str,
    error: String,
}

impl Provenance<'_> {
    fn columns(&self, build: &str) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.m.to_string(),
            self.n.map(|v| v.to_string()).unwrap_or_default(),
            self.cutoff.map(|v| v.to_string()).unwrap_or_default(),
            self.lambda.map(|v| v.to_string()).unwrap_or_default(),
            self.activation.to_string(),
            self.schedule.to_string(),
            build.to_string(),
            unix_now().to_string(),
            self.error.clone(),
        ]
    }
}

fn csv_writer(path: &Path, leading: &[&str]) -> Result<csv::Writer<File>> {
    let mut writer = csv::Writer::from_path(path)?;
    let header: Vec<&str> = leading
        .iter()
        .chain(PROVENANCE_HEADER.iter())
        .copied()
        .collect();
    writer.write_record(&header)?;
    Ok(writer)
}

fn opt_metric(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn error_tag(err: &Error) -> String {
    format!("{}: {err}", err.class())
}

/// Runs the experiment named in the config, writing its CSV (plus any
/// iteration traces) and the manifest into `out_dir`.
pub fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    std::fs::create_dir_all(out_dir)?;
    let output = match config.experiment.as_str() {
        "loss_decay" => run_loss_decay(config, out_dir)?,
        "approx_rate" => run_approx_rate(config, out_dir)?,
        "solve" => run_solve(config, out_dir)?,
        other => {
            return Err(Error::Config(format!(
                "unknown experiment '{other}' (known: loss_decay, approx_rate, solve)"
            )))
        }
    };
    Ok(output)
}

/// Test-loss decay as the feature count grows, at fixed sample size.
fn run_loss_decay(config: &RunConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    let kind = config.activation_kind()?;
    let d = config.problem.d;
    let problem =
        EllipticProblem::from_name(&config.problem.name, d, config.problem.potential)?;
    let prior = config.prior_spec(d, None)?;
    let seeds = config.replicate_seeds()?;
    let ms: Vec<usize> = if config.grid.m.is_empty() {
        (1..=10).map(|k| 50 * k).collect()
    } else {
        config.grid.m.clone()
    };
    let ns: Vec<usize> = if config.grid.n.is_empty() {
        vec![10_000]
    } else {
        config.grid.n.clone()
    };
    let csv_path = out_dir.join("loss_decay.csv");
    let mut writer = csv_writer(
        &csv_path,
        &["experiment", "problem", "prior", "d", "train_loss", "test_loss"],
    )?;
    let build = build_id();
    let cutoff_col = config.is_compact_prior().then_some(config.prior.cutoff);
    let mut rows = 0;
    let mut failed = 0;
    for &n in &ns {
        for &m in &ms {
            for &seed in &seeds {
                let schedule = loss_decay_schedule(config, n, m, d)?;
                let cell = loss_decay_cell(config, &problem, &prior, kind, n, m, seed, &schedule);
                let (train, test, error) = match cell {
                    Ok((train, test)) => (Some(train), Some(test), String::new()),
                    Err(e) => {
                        failed += 1;
                        (None, None, error_tag(&e))
                    }
                };
                let mut record = vec![
                    "loss_decay".to_string(),
                    problem.label().to_string(),
                    prior.to_string(),
                    d.to_string(),
                    opt_metric(train),
                    opt_metric(test),
                ];
                record.extend(
                    Provenance {
                        seed,
                        m,
                        n: Some(n),
                        cutoff: cutoff_col,
                        lambda: Some(schedule.lambda),
                        activation: &config.activation,
                        schedule: &schedule.label,
                        error,
                    }
                    .columns(&build),
                );
                writer.write_record(&record)?;
                rows += 1;
            }
        }
    }
    writer.flush()?;
    let manifest_path = write_manifest(config, out_dir)?;
    Ok(ExperimentOutput {
        csv_path,
        manifest_path,
        trace_paths: Vec::new(),
        rows,
        failed_cells: failed,
    })
}

/// Hyperparameters for one loss-decay cell: the sweep fixes `m`, the
/// schedule supplies `λ` (and an iteration budget for gradient solvers).
fn loss_decay_schedule(config: &RunConfig, n: usize, m: usize, d: usize) -> Result<Schedule> {
    match config.solver.schedule.as_str() {
        "ridge" => Ok(Schedule {
            m,
            lambda: 1.0,
            iterations: None,
            label: "ridge".to_string(),
        }),
        "pgd" => {
            let base = pgd_schedule(n, d, config.solver.iteration_scale)?;
            Ok(Schedule {
                m,
                lambda: 1.0 / (m as f64).sqrt(),
                iterations: base.iterations,
                label: "pgd".to_string(),
            })
        }
        "manual" => Ok(Schedule {
            m,
            lambda: config.solver.lambda,
            iterations: Some(config.solver.iterations),
            label: "manual".to_string(),
        }),
        other => Err(Error::Config(format!(
            "unknown schedule '{other}' (known: ridge, pgd, manual)"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn loss_decay_cell(
    config: &RunConfig,
    problem: &EllipticProblem,
    prior: &PriorSpec,
    kind: ActivationKind,
    n: usize,
    m: usize,
    seed: u64,
    schedule: &Schedule,
) -> Result<(f64, f64)> {
    let bank = sample(prior, m, mix_seed(seed, 0xBA4C ^ m as u64))?;
    let colloc = sample_collocation(problem, n, mix_seed(seed, 0xC011 ^ n as u64))?;
    let system = assemble(problem, &bank, &colloc, kind, schedule.lambda)?;
    let coefficients = match config.solver.kind.as_str() {
        "ridge" => ridge(&system)?.coefficients,
        "pgd" => {
            let run = pgd(
                &system,
                &PgdConfig {
                    radius: pgd_radius(config),
                    iterations: schedule.iterations.unwrap_or(config.solver.iterations),
                    step: StepRule::InverseSmoothness,
                },
            )?;
            run.coefficients
        }
        other => {
            return Err(Error::Config(format!(
                "unknown solver kind '{other}' (known: ridge, pgd)"
            )))
        }
    };
    let train = empirical_loss(&system, &coefficients)?;
    let test = estimate_test_loss(
        problem,
        &bank,
        kind,
        &coefficients,
        config.n_test_for(n),
        mix_seed(seed, 0x7E57),
    )?;
    Ok((train, test))
}

fn pgd_radius(config: &RunConfig) -> Option<f64> {
    if config.solver.radius > 0.0 {
        Some(config.solver.radius)
    } else {
        None
    }
}

/// Sobolev approximation error of the sampled representation as the
/// feature count (and, for the compact family, the truncation radius)
/// grows.
fn run_approx_rate(config: &RunConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    let kind = config.activation_kind()?;
    let d = config.problem.d;
    let target = BarronTarget::from_name(&config.target.name, d)?;
    let seeds = config.replicate_seeds()?;
    let ms: Vec<usize> = if config.grid.m.is_empty() {
        vec![500, 1000, 2000, 4000, 8000]
    } else {
        config.grid.m.clone()
    };
    let cutoffs: Vec<Option<f64>> = if config.is_compact_prior() {
        let radii = if config.grid.cutoffs.is_empty() {
            vec![2.0, 4.0, 8.0]
        } else {
            config.grid.cutoffs.clone()
        };
        radii.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let grid = evaluation_grid(d)?;
    let csv_path = out_dir.join("approx_rate.csv");
    let mut writer = csv_writer(
        &csv_path,
        &["experiment", "target", "prior", "d", "l2_sq", "h1_sq", "h2_sq"],
    )?;
    let build = build_id();
    let mut rows = 0;
    let mut failed = 0;
    for &cutoff in &cutoffs {
        let prior = config.prior_spec(d, cutoff)?;
        for &m in &ms {
            for &seed in &seeds {
                let cell = approx_cell(config, &target, &prior, kind, m, seed, &grid, cutoff);
                let (metrics, error) = match cell {
                    Ok(v) => (Some(v), String::new()),
                    Err(e) => {
                        failed += 1;
                        (None, error_tag(&e))
                    }
                };
                let mut record = vec![
                    "approx_rate".to_string(),
                    target.label().to_string(),
                    prior.to_string(),
                    d.to_string(),
                    opt_metric(metrics.map(|v| v.0)),
                    opt_metric(metrics.map(|v| v.1)),
                    opt_metric(metrics.map(|v| v.2)),
                ];
                record.extend(
                    Provenance {
                        seed,
                        m,
                        n: None,
                        cutoff,
                        lambda: None,
                        activation: &config.activation,
                        schedule: "",
                        error,
                    }
                    .columns(&build),
                );
                writer.write_record(&record)?;
                rows += 1;
            }
        }
    }
    writer.flush()?;
    let manifest_path = write_manifest(config, out_dir)?;
    Ok(ExperimentOutput {
        csv_path,
        manifest_path,
        trace_paths: Vec::new(),
        rows,
        failed_cells: failed,
    })
}

#[allow(clippy::too_many_arguments)]
fn approx_cell(
    _config: &RunConfig,
    target: &BarronTarget,
    prior: &PriorSpec,
    kind: ActivationKind,
    m: usize,
    seed: u64,
    grid: &QuadratureGrid,
    cutoff: Option<f64>,
) -> Result<(f64, f64, f64)> {
    let salt = 0xA44C ^ (m as u64) ^ cutoff.map(f64::to_bits).unwrap_or(0);
    let bank = sample(prior, m, mix_seed(seed, salt))?;
    let model = if cutoff.is_some() {
        coefficients_compact(target, &bank, kind)?
    } else {
        coefficients_heavytail(
            target,
            &bank,
            kind,
            crate::representation::DEFAULT_INDICATOR_CONSTANT,
        )?
    };
    sobolev_error(&model, target, grid)
}

/// Full PDE solves at scheduled hyperparameters, one summary row per
/// `(n, seed)`, with iteration traces for the gradient solver.
fn run_solve(config: &RunConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    let kind = config.activation_kind()?;
    let d = config.problem.d;
    let problem =
        EllipticProblem::from_name(&config.problem.name, d, config.problem.potential)?;
    let prior = config.prior_spec(d, None)?;
    let seeds = config.replicate_seeds()?;
    let ns: Vec<usize> = if config.grid.n.is_empty() {
        vec![10_000]
    } else {
        config.grid.n.clone()
    };
    let grid = evaluation_grid(d)?;
    let csv_path = out_dir.join("solve_summary.csv");
    let mut writer = csv_writer(
        &csv_path,
        &[
            "experiment",
            "problem",
            "prior",
            "d",
            "train_loss",
            "test_loss",
            "rel_l2_error",
            "kappa_estimate",
            "wall_secs",
            "solver",
        ],
    )?;
    let build = build_id();
    let cutoff_col = config.is_compact_prior().then_some(config.prior.cutoff);
    let mut rows = 0;
    let mut failed = 0;
    let mut trace_paths = Vec::new();
    for &n in &ns {
        for &seed in &seeds {
            let schedule = solve_schedule(config, n, d)?;
            let cell = solve_cell(
                config, &problem, &prior, kind, n, seed, &schedule, &grid, out_dir,
            );
            let (metrics, error) = match cell {
                Ok((metrics, trace)) => {
                    if let Some(path) = trace {
                        trace_paths.push(path);
                    }
                    (Some(metrics), String::new())
                }
                Err(e) => {
                    failed += 1;
                    (None, error_tag(&e))
                }
            };
            let mut record = vec![
                "solve".to_string(),
                problem.label().to_string(),
                prior.to_string(),
                d.to_string(),
                opt_metric(metrics.as_ref().map(|v| v.train)),
                opt_metric(metrics.as_ref().map(|v| v.test)),
                opt_metric(metrics.as_ref().and_then(|v| v.rel_l2)),
                opt_metric(metrics.as_ref().map(|v| v.kappa)),
                opt_metric(metrics.as_ref().map(|v| v.wall)),
                config.solver.kind.clone(),
            ];
            record.extend(
                Provenance {
                    seed,
                    m: schedule.m,
                    n: Some(n),
                    cutoff: cutoff_col,
                    lambda: Some(schedule.lambda),
                    activation: &config.activation,
                    schedule: &schedule.label,
                    error,
                }
                .columns(&build),
            );
            writer.write_record(&record)?;
            rows += 1;
        }
    }
    writer.flush()?;
    let manifest_path = write_manifest(config, out_dir)?;
    Ok(ExperimentOutput {
        csv_path,
        manifest_path,
        trace_paths,
        rows,
        failed_cells: failed,
    })
}

fn solve_schedule(config: &RunConfig, n: usize, d: usize) -> Result<Schedule> {
    match config.solver.schedule.as_str() {
        "ridge" => ridge_schedule(n),
        "pgd" => pgd_schedule(n, d, config.solver.iteration_scale),
        "manual" => {
            let m = *config.grid.m.first().ok_or_else(|| {
                Error::Config("the manual schedule needs grid.m to supply a feature count".into())
            })?;
            Ok(Schedule {
                m,
                lambda: config.solver.lambda,
                iterations: Some(config.solver.iterations),
                label: "manual".to_string(),
            })
        }
        other => Err(Error::Config(format!(
            "unknown schedule '{other}' (known: ridge, pgd, manual)"
        ))),
    }
}

struct SolveMetrics {
    train: f64,
    test: f64,
    rel_l2: Option<f64>,
    kappa: f64,
    wall: f64,
}

#[allow(clippy::too_many_arguments)]
fn solve_cell(
    config: &RunConfig,
    problem: &EllipticProblem,
    prior: &PriorSpec,
    kind: ActivationKind,
    n: usize,
    seed: u64,
    schedule: &Schedule,
    grid: &QuadratureGrid,
    out_dir: &Path,
) -> Result<(SolveMetrics, Option<PathBuf>)> {
    let bank = sample(prior, schedule.m, mix_seed(seed, 0xBA4C ^ schedule.m as u64))?;
    let colloc = sample_collocation(problem, n, mix_seed(seed, 0xC011 ^ n as u64))?;
    let system = assemble(problem, &bank, &colloc, kind, schedule.lambda)?;
    let clock = Instant::now();
    let (coefficients, kappa, wall, trace) = match config.solver.kind.as_str() {
        "ridge" => {
            let sol = ridge(&system)?;
            (sol.coefficients, sol.kappa_estimate, clock.elapsed().as_secs_f64(), None)
        }
        "pgd" => {
            let run = pgd(
                &system,
                &PgdConfig {
                    radius: pgd_radius(config),
                    iterations: schedule.iterations.unwrap_or(config.solver.iterations),
                    step: StepRule::InverseSmoothness,
                },
            )?;
            let trace_path = out_dir.join(format!("solve_trace_n{n}_seed{seed}.csv"));
            let mut tw = csv::Writer::from_path(&trace_path)?;
            tw.write_record(["iteration", "loss", "wall_secs"])?;
            for (t, (loss, secs)) in run
                .loss_trace
                .iter()
                .zip(run.trace_secs.iter())
                .enumerate()
            {
                tw.write_record(&[t.to_string(), loss.to_string(), secs.to_string()])?;
            }
            tw.flush()?;
            let wall = *run.trace_secs.last().expect("trace is never empty");
            (run.coefficients, run.kappa_estimate, wall, Some(trace_path))
        }
        other => {
            return Err(Error::Config(format!(
                "unknown solver kind '{other}' (known: ridge, pgd)"
            )))
        }
    };
    let train = empirical_loss(&system, &coefficients)?;
    let test = estimate_test_loss(
        problem,
        &bank,
        kind,
        &coefficients,
        config.n_test_for(n),
        mix_seed(seed, 0x7E57),
    )?;
    let rel_l2 = if problem.has_exact_solution() {
        Some(relative_l2_error(problem, &bank, kind, &coefficients, grid)?)
    } else {
        None
    };
    Ok((
        SolveMetrics {
            train,
            test,
            rel_l2,
            kappa,
            wall,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn power_law_fits() {
        let exact: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64, 50.0 / k as f64)).collect();
        let fit = fit_loglog_slope(&exact).unwrap();
        assert!((fit.slope + 1.0).abs() <= 1e-12);
        assert!((fit.intercept - 50.0f64.ln()).abs() <= 1e-12);
        assert!((fit.r_squared - 1.0).abs() <= 1e-12);

        let constant: Vec<(f64, f64)> = (1..=5).map(|k| (k as f64, 3.0)).collect();
        let fit = fit_loglog_slope(&constant).unwrap();
        assert!(fit.slope.abs() <= 1e-12);
        assert!((fit.r_squared - 1.0).abs() <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let noisy: Vec<(f64, f64)> = (0..30)
            .map(|k| {
                let x = 2.0f64.powi(k % 10);
                let jitter: f64 = rng.random::<f64>() - 0.5;
                (x, 10.0 * x.powf(-2.0) * (0.02 * jitter).exp())
            })
            .collect();
        let fit = fit_loglog_slope(&noisy).unwrap();
        assert!((fit.slope + 2.0).abs() <= 0.05, "slope {}", fit.slope);

        assert!(fit_loglog_slope(&exact[..2]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn median_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
        let curve = median_curve(&[(2.0, 5.0), (1.0, 1.0), (2.0, 7.0), (1.0, 3.0)]).unwrap();
        assert_eq!(curve, vec![(1.0, 2.0), (2.0, 6.0)]);
    }

    #[test]
    fn seed_mixing_is_deterministic_and_salt_sensitive() {
        assert_eq!(mix_seed(42, 1), mix_seed(42, 1));
        assert_ne!(mix_seed(42, 1), mix_seed(42, 2));
        assert_ne!(mix_seed(42, 1), mix_seed(43, 1));
        assert_eq!(build_id().len(), 16);
        assert_eq!(build_id(), build_id());
    }

    #[test]
    fn config_defaults_and_validation() {
        let config = RunConfig::defaults_for("loss_decay");
        assert_eq!(config.problem.name, "poisson1d");
        assert_eq!(config.activation, "spline34");
        assert_eq!(config.prior.family, "compact");
        assert_eq!(config.grid.seeds, 5);
        assert_eq!(config.solver.kind, "ridge");
        assert_eq!(config.n_test_for(500), 5000);

        let parsed = RunConfig::from_toml_str(
            r#"
            experiment = "solve"
            activation = "tanhdiff"
            [problem]
            name = "product_sine"
            d = 2
            potential = 1.5
            [grid]
            n = [256]
            seeds = 2
            base_seed = 7
            [solver]
            kind = "pgd"
            schedule = "manual"
            lambda = 0.25
            iterations = 40
            "#,
        )
        .unwrap();
        assert_eq!(parsed.problem.d, 2);
        assert_eq!(parsed.solver.lambda, 0.25);
        assert_eq!(parsed.replicate_seeds().unwrap(), vec![7, 8]);

        assert!(RunConfig::from_toml_str("no_experiment = 1").is_err());
        assert!(RunConfig::from_toml_str("experiment = \"solve\"\nbogus = 2").is_err());
        let bad = RunConfig::from_toml_str("experiment = \"nope\"").unwrap();
        assert!(matches!(
            run_experiment(&bad, Path::new("/tmp")),
            Err(Error::Config(_))
        ));
    }

    fn strip_volatile_columns(csv_text: &str) -> String {
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let headers = reader.headers().unwrap().clone();
        let volatile: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| *h == "unix_time" || *h == "wall_secs")
            .map(|(i, _)| i)
            .collect();
        let mut out = String::new();
        for record in reader.records() {
            let record = record.unwrap();
            let kept: Vec<&str> = record
                .iter()
                .enumerate()
                .filter(|(i, _)| !volatile.contains(i))
                .map(|(_, v)| v)
                .collect();
            out.push_str(&kept.join(","));
            out.push('\n');
        }
        out
    }

    #[test]
    fn loss_decay_runs_are_deterministic() {
        let config = RunConfig::from_toml_str(
            r#"
            experiment = "loss_decay"
            [grid]
            m = [8, 16]
            n = [200]
            seeds = 2
            base_seed = 5
            [solver]
            schedule = "manual"
            lambda = 0.5
            n_test = 400
            "#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = run_experiment(&config, &dir.path().join("a")).unwrap();
        assert_eq!(first.rows, 4);
        assert_eq!(first.failed_cells, 0);
        assert!(first.manifest_path.exists());
        let second = run_experiment(&config, &dir.path().join("b")).unwrap();
        let a = std::fs::read_to_string(&first.csv_path).unwrap();
        let b = std::fs::read_to_string(&second.csv_path).unwrap();
        assert_eq!(strip_volatile_columns(&a), strip_volatile_columns(&b));
        // Metrics parse and are positive.
        let mut reader = csv::Reader::from_path(&first.csv_path).unwrap();
        for record in reader.records() {
            let record = record.unwrap();
            let test: f64 = record[5].parse().unwrap();
            assert!(test.is_finite() && test > 0.0);
        }
    }

    #[test]
    fn approx_rate_smoke_run() {
        let config = RunConfig::from_toml_str(
            r#"
            experiment = "approx_rate"
            [grid]
            m = [50, 100]
            cutoffs = [2.0, 4.0]
            seeds = 2
            "#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config, dir.path()).unwrap();
        assert_eq!(out.rows, 8);
        assert_eq!(out.failed_cells, 0);
        let mut reader = csv::Reader::from_path(&out.csv_path).unwrap();
        let headers = reader.headers().unwrap().clone();
        assert_eq!(&headers[4], "l2_sq");
        for record in reader.records() {
            let record = record.unwrap();
            let l2: f64 = record[4].parse().unwrap();
            let h1: f64 = record[5].parse().unwrap();
            let h2: f64 = record[6].parse().unwrap();
            assert!(l2 <= h1 && h1 <= h2, "norms must be nested: {l2} {h1} {h2}");
            assert!(!record[3].is_empty(), "cutoff column should be set");
        }
    }

    #[test]
    fn solve_smoke_run_with_traces() {
        let config = RunConfig::from_toml_str(
            r#"
            experiment = "solve"
            [grid]
            m = [6]
            n = [300]
            seeds = 1
            [solver]
            kind = "pgd"
            schedule = "manual"
            lambda = 0.3
            iterations = 150
            n_test = 600
            "#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config, dir.path()).unwrap();
        assert_eq!(out.rows, 1);
        assert_eq!(out.trace_paths.len(), 1);
        assert!(out.trace_paths[0].exists());
        let mut reader = csv::Reader::from_path(&out.csv_path).unwrap();
        let record = reader.records().next().unwrap().unwrap();
        let rel: f64 = record[6].parse().unwrap();
        assert!(rel.is_finite() && rel >= 0.0);
        let trace = std::fs::read_to_string(&out.trace_paths[0]).unwrap();
        assert_eq!(trace.lines().count(), 152, "header plus 151 samples");
    }

    #[test]
    fn failed_cells_are_tagged_not_fatal() {
        // 50 features against 16+16 rows with no ridge: singular.
        let config = RunConfig::from_toml_str(
            r#"
            experiment = "solve"
            [grid]
            m = [50]
            n = [16]
            seeds = 1
            [solver]
            kind = "ridge"
            schedule = "manual"
            lambda = 0.0
            iterations = 1
            "#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config, dir.path()).unwrap();
        assert_eq!(out.rows, 1);
        assert_eq!(out.failed_cells, 1);
        let text = std::fs::read_to_string(&out.csv_path).unwrap();
        assert!(text.contains("singular"), "error tag should name the class: {text}");
    }

    #[test]
    fn slope_extraction_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut writer = csv::Writer::from_path(&path).unwrap();
        writer.write_record(["m", "test_loss", "error"]).unwrap();
        for m in [10, 20, 40, 80] {
            for seed in 0..3 {
                let y = 100.0 / m as f64 * (1.0 + 0.01 * seed as f64);
                writer
                    .write_record(&[m.to_string(), y.to_string(), String::new()])
                    .unwrap();
            }
        }
        writer
            .write_record(["160", "not_a_number", "numeric: failed"])
            .unwrap();
        writer.flush().unwrap();
        let fit = slope_from_csv(&path, "m", "test_loss").unwrap();
        assert!((fit.slope + 1.0).abs() <= 0.02, "slope {}", fit.slope);
        assert!(slope_from_csv(&path, "m", "missing").is_err());
    }
}
