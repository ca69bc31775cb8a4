//! Scenario files and the `incentive-forge` subcommands.
//!
//! A scenario is a strict JSON document (unknown keys are rejected) with
//! row-major matrices:
//!
//! ```json
//! {
//!   "n": 1, "m": 1,
//!   "A": [0.4], "B": [1.0], "Q": [1.0], "R": [1.0],
//!   "xref": [1.0], "N": 10, "mu0": [-1.0], "Sigma0": [0.09],
//!   "theta": [0.0],
//!   "monte_carlo": { "samples": 100, "seed": 7 }
//! }
//! ```
//!
//! `Sigma0` is the covariance of the initial error. A per-component standard
//! deviation may be given instead as `initial_std`; it is squared onto the
//! diagonal (`initial_std: [0.3]` is `Sigma0: [0.09]`).
//!
//! Every command writes its results into the output directory. CSV files
//! carry a header row, `\n` line endings and shortest round-trip decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::{expected_cost, mean_and_std_error};
use crate::dynamics::{propagate_moments, sample_trajectories, steady_state_error, Trajectory};
use crate::error::Error;
use crate::gradient::{analytic_gradient, finite_difference_gradient, relative_discrepancy, DEFAULT_FD_STEP};
use crate::model::{build_closed_loop, validate, GameInstance, GameParameters, IncentiveMatrix};
use crate::optimizer::{optimize, scalar_grid, scalar_thetas, sweep_cost, OptimizerConfig, StopReason};
use crate::scalar::{grid_argmin, AsymptoticResult, GeometricSums, Regime, ScalarInstance};

/// Gradient checks fail above this relative discrepancy.
pub const GRADCHECK_TOL: f64 = 1e-5;

/// Coarse grid size for per-point argmin searches in N and R sweeps.
const ARGMIN_POINTS: usize = 4001;
const ARGMIN_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{0}")]
    Unstable(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Unstable(_) => 3,
            CliError::SelfCheck(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::NonFinite { .. } | Error::Unstable { .. } | Error::NonFiniteCost { .. } => {
                CliError::Unstable(err.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtrack_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self { samples: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "N")]
    Horizon,
    #[serde(rename = "R")]
    FollowerWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepGrid {
    Values(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub variable: SweepVariable,
    pub grid: SweepGrid,
    /// Θ search interval for per-point argmins; defaults to the stability
    /// interval of each grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub xref: Vec<f64>,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub mu0: Vec<f64>,
    #[serde(rename = "Sigma0", default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_std: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub monte_carlo: MonteCarloSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn matrix(name: &str, entries: &[f64], rows: usize, cols: usize) -> CliResult<DMatrix<f64>> {
    if entries.len() != rows * cols {
        return Err(CliError::Invalid(format!(
            "`{name}` needs {} entries ({rows}x{cols}), got {}",
            rows * cols,
            entries.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, entries))
}

fn vector(name: &str, entries: &[f64], len: usize) -> CliResult<DVector<f64>> {
    if entries.len() != len {
        return Err(CliError::Invalid(format!(
            "`{name}` needs {len} entries, got {}",
            entries.len()
        )));
    }
    Ok(DVector::from_column_slice(entries))
}

impl Scenario {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn game(&self) -> CliResult<GameInstance> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(CliError::Invalid("`n` and `m` must be positive".into()));
        }
        let sigma0 = match (&self.sigma0, &self.initial_std) {
            (Some(_), Some(_)) => {
                return Err(CliError::Invalid("give either `Sigma0` or `initial_std`, not both".into()))
            }
            (Some(cov), None) => matrix("Sigma0", cov, n, n)?,
            (None, Some(std)) => {
                let std = vector("initial_std", std, n)?;
                DMatrix::from_diagonal(&std.map(|s| s * s))
            }
            (None, None) => DMatrix::zeros(n, n),
        };
        let params = GameParameters {
            a: matrix("A", &self.a, n, n)?,
            b: matrix("B", &self.b, n, m)?,
            q: matrix("Q", &self.q, n, n)?,
            r: matrix("R", &self.r, m, m)?,
            xref: vector("xref", &self.xref, n)?,
            horizon: self.horizon,
            mu0: vector("mu0", &self.mu0, n)?,
            sigma0,
        };
        Ok(validate(params)?)
    }

    pub fn theta(&self) -> CliResult<Option<IncentiveMatrix>> {
        self.theta
            .as_ref()
            .map(|entries| matrix("theta", entries, self.n, self.m).map(IncentiveMatrix::new))
            .transpose()
    }

    pub fn require_theta(&self, command: &str) -> CliResult<IncentiveMatrix> {
        self.theta()?
            .ok_or_else(|| CliError::Invalid(format!("scenario field `theta` is required for {command}")))
    }

    pub fn optimizer_config(&self) -> CliResult<OptimizerConfig> {
        let defaults = OptimizerConfig::default();
        let s = &self.optimizer;
        let config = OptimizerConfig {
            max_iters: s.max_iters.unwrap_or(defaults.max_iters),
            grad_tol: s.grad_tol.unwrap_or(defaults.grad_tol),
            initial_step: s.initial_step.unwrap_or(defaults.initial_step),
            backtrack_factor: s.backtrack_factor.unwrap_or(defaults.backtrack_factor),
            armijo_c: s.armijo_c.unwrap_or(defaults.armijo_c),
            theta_init: self.theta()?,
        };
        config.check()?;
        Ok(config)
    }
}

/// Options shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Added to every analytic gradient entry in `gradcheck` (negative control).
    pub corrupt_gradient: Option<f64>,
}

impl RunOptions {
    fn out_dir(&self, scenario: &Scenario) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| scenario.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn seed(&self, scenario: &Scenario) -> u64 {
        self.seed.unwrap_or(scenario.monte_carlo.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evaluate,
    Gradcheck,
    Optimize,
    Simulate,
    Scalar,
    Sweep,
}

/// Runs `command` and returns the files it wrote.
pub fn run(command: Command, scenario: &Scenario, options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let out_dir = options.out_dir(scenario);
    let outputs = match command {
        Command::Evaluate => cmd_evaluate(scenario)?,
        Command::Gradcheck => cmd_gradcheck(scenario, options.corrupt_gradient)?,
        Command::Optimize => cmd_optimize(scenario)?,
        Command::Simulate => cmd_simulate(scenario, options.seed(scenario))?,
        Command::Scalar => cmd_scalar(scenario)?,
        Command::Sweep => cmd_sweep(scenario)?,
    };
    fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    for file in &outputs.files {
        let path = out_dir.join(&file.name);
        fs::write(&path, &file.contents)?;
        written.push(path);
    }
    match outputs.failure {
        Some(err) => Err(err),
        None => Ok(written),
    }
}

#[derive(Debug, Clone)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Files produced by a command, plus an error to report after writing
/// them (used by `gradcheck` so the report survives a failed check).
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    pub failure: Option<CliError>,
}

impl CommandOutput {
    fn push(&mut self, name: impl Into<String>, contents: String) {
        self.files.push(OutputFile {
            name: name.into(),
            contents,
        });
    }

    fn push_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.push(name, text);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub tracking: f64,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub is_schur: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResult {
    pub theta: Vec<f64>,
    pub cost: CostReport,
    pub stability: StabilityReport,
    pub steady_state_error: Option<Vec<f64>>,
}

pub fn cmd_evaluate(scenario: &Scenario) -> CliResult<CommandOutput> {
    let game = scenario.game()?;
    let theta = scenario.require_theta("evaluate")?;
    let cost = expected_cost(&game, &theta)?;
    if !cost.total.is_finite() {
        return Err(Error::NonFiniteCost {
            theta: theta.to_row_major(),
        }
        .into());
    }
    let cl = build_closed_loop(&game, &theta)?;
    let result = EvaluateResult {
        theta: theta.to_row_major(),
        cost: CostReport {
            total: cost.total,
            tracking: cost.tracking,
            payment: cost.payment,
        },
        stability: StabilityReport {
            spectral_radius: cl.spectral_radius(),
            is_schur: cl.is_schur(),
        },
        steady_state_error: steady_state_error(&game, &theta).ok().map(|e| e.as_slice().to_vec()),
    };
    let mut out = CommandOutput::default();
    out.push_json("evaluate.json", &result)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckResult {
    pub theta: Vec<f64>,
    /// Row-major.
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub step: f64,
    pub relative_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn cmd_gradcheck(scenario: &Scenario, corrupt: Option<f64>) -> CliResult<CommandOutput> {
    let game = scenario.game()?;
    let theta = scenario.require_theta("gradcheck")?;
    let mut analytic = analytic_gradient(&game, &theta)?;
    if let Some(delta) = corrupt {
        analytic.add_scalar_mut(delta);
    }
    let fd = finite_difference_gradient(&game, &theta, DEFAULT_FD_STEP)?;
    if analytic.iter().chain(fd.iter()).any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteCost {
            theta: theta.to_row_major(),
        }
        .into());
    }
    let discrepancy = relative_discrepancy(&analytic, &fd);
    let passed = discrepancy <= GRADCHECK_TOL;
    let row_major = |m: &DMatrix<f64>| IncentiveMatrix::new(m.clone()).to_row_major();
    let result = GradcheckResult {
        theta: theta.to_row_major(),
        analytic: row_major(&analytic),
        finite_difference: row_major(&fd),
        step: DEFAULT_FD_STEP,
        relative_discrepancy: discrepancy,
        tolerance: GRADCHECK_TOL,
        passed,
    };
    let mut out = CommandOutput::default();
    out.push_json("gradcheck.json", &result)?;
    if !passed {
        out.failure = Some(CliError::SelfCheck(format!(
            "gradient discrepancy {discrepancy:e} exceeds {GRADCHECK_TOL:e}"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub theta_final: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub stability: StabilityReport,
    pub steady_state_error_norm: Option<f64>,
}

pub fn cmd_optimize(scenario: &Scenario) -> CliResult<CommandOutput> {
    let game = scenario.game()?;
    let config = scenario.optimizer_config()?;
    let report = optimize(&game, &config)?;
    let (n, m) = (game.state_dim(), game.input_dim());

    let mut csv = String::from("iter,cost,grad_norm");
    for i in 0..n {
        for j in 0..m {
            let _ = write!(csv, ",theta_{i}_{j}");
        }
    }
    csv.push('\n');
    for (t, ((cost, grad), theta)) in report
        .cost_trace
        .iter()
        .zip(&report.grad_norm_trace)
        .zip(&report.theta_trace)
        .enumerate()
    {
        let _ = write!(csv, "{t},{},{}", num(*cost), num(*grad));
        for v in theta.to_row_major() {
            let _ = write!(csv, ",{}", num(v));
        }
        csv.push('\n');
    }

    let result = OptimizeResult {
        theta_final: report.theta_final.to_row_major(),
        converged: report.converged,
        stop_reason: report.stop_reason,
        iterations: report.iterations(),
        cost: *report.cost_trace.last().expect("trace holds the initial point"),
        grad_norm: *report.grad_norm_trace.last().expect("trace holds the initial point"),
        stability: StabilityReport {
            spectral_radius: report.final_stability.spectral_radius,
            is_schur: report.final_stability.is_schur,
        },
        steady_state_error_norm: report.steady_state_error_norm,
    };
    let mut out = CommandOutput::default();
    out.push("optimize_trace.csv", csv);
    out.push_json("optimize.json", &result)?;
    Ok(out)
}

pub fn cmd_simulate(scenario: &Scenario, seed: u64) -> CliResult<CommandOutput> {
    let game = scenario.game()?;
    let theta = scenario.require_theta("simulate")?;
    let samples = scenario.monte_carlo.samples;
    if samples == 0 {
        return Err(CliError::Invalid("`monte_carlo.samples` must be positive".into()));
    }
    let trajectories = sample_trajectories(&game, &theta, samples, seed)?;

    let mut out = CommandOutput::default();
    if samples == 1 {
        out.push("trajectory.csv", trajectory_csv(&game, &trajectories[0]));
        return Ok(out);
    }
    let width = (samples - 1).to_string().len();
    for (i, traj) in trajectories.iter().enumerate() {
        out.push(format!("trajectory_{i:0width$}.csv"), trajectory_csv(&game, traj));
    }
    out.push("summary.csv", summary_csv(&game, &theta, &trajectories)?);
    Ok(out)
}

fn trajectory_csv(game: &GameInstance, traj: &Trajectory) -> String {
    let (n, m) = (game.state_dim(), game.input_dim());
    let mut csv = String::from("k");
    for i in 0..n {
        let _ = write!(csv, ",x_{i}");
    }
    for j in 0..m {
        let _ = write!(csv, ",u_{j}");
    }
    csv.push_str(",payment,leader_stage_cost,follower_stage_cost\n");
    for k in 0..traj.len() {
        let _ = write!(csv, "{k}");
        for v in traj.x[k].iter().chain(traj.u[k].iter()) {
            let _ = write!(csv, ",{}", num(*v));
        }
        let _ = writeln!(
            csv,
            ",{},{},{}",
            num(traj.payment[k]),
            num(traj.leader_stage_cost[k]),
            num(traj.follower_stage_cost[k])
        );
    }
    csv
}

/// Per-stage empirical error moments next to the propagated ones.
fn summary_csv(game: &GameInstance, theta: &IncentiveMatrix, trajectories: &[Trajectory]) -> CliResult<String> {
    let n = game.state_dim();
    let moments = propagate_moments(game, theta)?;
    let samples = trajectories.len() as f64;
    let mut csv = String::from("k");
    for prefix in ["mean_e", "var_e", "stderr_e", "mu", "sigma"] {
        for i in 0..n {
            let _ = write!(csv, ",{prefix}_{i}");
        }
    }
    csv.push('\n');
    for k in 0..game.horizon() {
        let mut means = Vec::with_capacity(n);
        let mut vars = Vec::with_capacity(n);
        let mut errs = Vec::with_capacity(n);
        for i in 0..n {
            let errors: Vec<f64> = trajectories.iter().map(|t| t.x[k][i] - game.xref()[i]).collect();
            let (mean, se) = mean_and_std_error(&errors);
            means.push(mean);
            vars.push(se * se * samples);
            errs.push(se);
        }
        let _ = write!(csv, "{k}");
        let analytic_mu = moments.mu[k].iter().copied();
        let analytic_var = (0..n).map(|i| moments.sigma[k][(i, i)]);
        for v in means
            .into_iter()
            .chain(vars)
            .chain(errs)
            .chain(analytic_mu)
            .chain(analytic_var)
        {
            let _ = write!(csv, ",{}", num(v));
        }
        csv.push('\n');
    }
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub theta_star: Option<f64>,
    pub regime: Option<Regime>,
    /// Set when the characterization does not apply.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarResult {
    pub stability_interval: [f64; 2],
    pub theta: Option<f64>,
    pub closed_form_cost: Option<f64>,
    pub steady_state_avg_cost: Option<f64>,
    pub infinite_horizon: AsymptoteReport,
    pub r_infinity: AsymptoteReport,
    /// Regime of the infinite-horizon minimizer.
    pub regime: Option<Regime>,
    /// Sums at `theta`, when one is given.
    pub geometric_sums: Option<GeometricSums>,
    pub gamma: f64,
    pub gamma_prime: f64,
}

pub fn cmd_scalar(scenario: &Scenario) -> CliResult<CommandOutput> {
    let game = scenario.game()?;
    let s = ScalarInstance::from_game(&game)?;
    let theta = scenario.theta()?.map(|t| t.as_matrix()[(0, 0)]);
    let (lo, hi) = s.stability_interval();

    let report = |res: crate::error::Result<AsymptoticResult>| match res {
        Ok(r) => AsymptoteReport {
            theta_star: Some(r.theta_star),
            regime: Some(r.regime),
            error: None,
        },
        Err(e) => AsymptoteReport {
            theta_star: None,
            regime: None,
            error: Some(e.to_string()),
        },
    };
    let infinite_horizon = report(s.theta_opt_infinite_horizon());
    let agg = s.horizon_aggregate();
    let result = ScalarResult {
        stability_interval: [lo, hi],
        theta,
        closed_form_cost: theta.map(|t| s.closed_form_cost(t)),
        steady_state_avg_cost: theta.and_then(|t| s.steady_state_avg_cost(t).ok()),
        regime: infinite_horizon.regime,
        geometric_sums: theta.map(|t| s.geometric_sums(t)),
        infinite_horizon,
        r_infinity: report(s.theta_opt_r_infinity()),
        gamma: agg.gamma,
        gamma_prime: agg.gamma_prime,
    };
    let mut out = CommandOutput::default();
    out.push_json("scalar.json", &result)?;
    Ok(out)
}

fn grid_values(grid: &SweepGrid) -> CliResult<Vec<f64>> {
    let values = match grid {
        SweepGrid::Values(values) => values.clone(),
        SweepGrid::Range(GridRange { start, stop, step }) => {
            if !(*step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
                return Err(CliError::Invalid(
                    "sweep grid needs finite start <= stop and a positive step".into(),
                ));
            }
            scalar_grid(*start, *stop, *step)
        }
    };
    if values.is_empty() {
        return Err(CliError::Invalid("sweep grid is empty".into()));
    }
    Ok(values)
}

fn argmin_theta(s: &ScalarInstance, range: Option<[f64; 2]>) -> CliResult<f64> {
    let (lo, hi) = match range {
        Some([lo, hi]) => (lo, hi),
        None => s.stability_interval(),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(CliError::Invalid(format!("empty theta search interval [{lo}, {hi}]")));
    }
    Ok(grid_argmin(|t| s.closed_form_cost(t), lo, hi, ARGMIN_POINTS, ARGMIN_TOL).0)
}

pub fn cmd_sweep(scenario: &Scenario) -> CliResult<CommandOutput> {
    let game = scenario.game()?;
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Invalid("scenario field `sweep` is required for sweep".into()))?;
    let s = ScalarInstance::from_game(&game)?;
    let values = grid_values(&sweep.grid)?;

    let mut out = CommandOutput::default();
    match sweep.variable {
        SweepVariable::Theta => {
            let costs = sweep_cost(&game, &scalar_thetas(&values))?;
            let mut csv = String::from("theta,cost\n");
            for (theta, cost) in costs {
                let _ = writeln!(csv, "{},{}", num(theta.as_matrix()[(0, 0)]), num(cost));
            }
            out.push("sweep_theta.csv", csv);
        }
        SweepVariable::Horizon => {
            let mut csv = String::from("N,argmin_theta\n");
            for v in values {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(CliError::Invalid(format!("horizon grid value {v} is not a positive integer")));
                }
                let horizon = v as usize;
                let theta = argmin_theta(&s.with_horizon(horizon), sweep.theta_range)?;
                let _ = writeln!(csv, "{horizon},{}", num(theta));
            }
            out.push("sweep_N.csv", csv);
        }
        SweepVariable::FollowerWeight => {
            let mut csv = String::from("R,argmin_theta\n");
            for r in values {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(CliError::Invalid(format!("follower weight {r} must be positive")));
                }
                let theta = argmin_theta(&s.with_r(r), sweep.theta_range)?;
                let _ = writeln!(csv, "{},{}", num(r), num(theta));
            }
            out.push("sweep_R.csv", csv);
        }
    }
    Ok(out)
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
        "n": 1, "m": 1,
        "A": [0.4], "B": [1.0], "Q": [1.0], "R": [1.0],
        "xref": [1.0], "N": 10, "mu0": [-1.0], "Sigma0": [0.09],
        "theta": [0.0]
    }"#;

    #[test]
    fn parses_scalar_scenario() {
        let scenario = Scenario::from_json(SCALAR).unwrap();
        let game = scenario.game().unwrap();
        assert_eq!(game.horizon(), 10);
        assert_eq!(scenario.theta().unwrap().unwrap().as_matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SCALAR.replace("\"theta\"", "\"thetaa\"");
        let err = Scenario::from_json(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("thetaa"));
    }

    #[test]
    fn standard_deviation_is_squared() {
        let text = SCALAR.replace("\"Sigma0\": [0.09]", "\"initial_std\": [0.3]");
        let game = Scenario::from_json(&text).unwrap().game().unwrap();
        assert!((game.sigma0()[(0, 0)] - 0.09).abs() < 1e-17);
    }

    #[test]
    fn both_covariance_forms_are_rejected() {
        let text = SCALAR.replace("\"Sigma0\": [0.09]", "\"Sigma0\": [0.09], \"initial_std\": [0.3]");
        assert!(matches!(Scenario::from_json(&text).unwrap().game(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn wrong_theta_shape_is_invalid() {
        let text = SCALAR.replace("\"theta\": [0.0]", "\"theta\": [0.0, 1.0]");
        let scenario = Scenario::from_json(&text).unwrap();
        assert_eq!(cmd_evaluate(&scenario).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_theta_names_the_field() {
        let text = SCALAR.replace(",\n        \"theta\": [0.0]", "");
        let scenario = Scenario::from_json(&text).unwrap();
        let err = cmd_evaluate(&scenario).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`theta`"));
    }

    #[test]
    fn evaluate_reports_open_loop_cost() {
        let out = cmd_evaluate(&Scenario::from_json(SCALAR).unwrap()).unwrap();
        let result: EvaluateResult = serde_json::from_str(&out.files[0].contents).unwrap();
        assert!((result.cost.total - 10.107_142_856).abs() < 1e-8);
        assert!(result.stability.is_schur);
        assert!((result.steady_state_error.unwrap()[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_grid_forms() {
        let list: SweepGrid = serde_json::from_str("[1, 10, 100]").unwrap();
        assert_eq!(list, SweepGrid::Values(vec![1.0, 10.0, 100.0]));
        let range: SweepGrid = serde_json::from_str(r#"{"start": 0, "stop": 1, "step": 0.5}"#).unwrap();
        assert_eq!(grid_values(&range).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn number_formatting_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0, 10.107142856] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(CliError::from(Error::NonFinite { stage: 3 }).exit_code(), 3);
        assert_eq!(CliError::from(Error::BadHorizon(0)).exit_code(), 2);
        assert_eq!(CliError::SelfCheck(String::new()).exit_code(), 4);
    }
}
