use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use incentive_forge::cli::{run, CliError, Command, RunOptions, Scenario};

/// Incentive design for linear-quadratic tracking games.
#[derive(Debug, Parser)]
#[command(name = "incentive-forge", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `monte_carlo.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Expected cost, stability and steady-state error at `theta`.
    Evaluate(Common),
    /// Compare the analytic gradient with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_gradient: Option<f64>,
    },
    /// Gradient descent from `theta` (or zero).
    Optimize(Common),
    /// Roll out sampled trajectories.
    Simulate(Common),
    /// Closed-form scalar quantities.
    Scalar(Common),
    /// Cost or argmin sweeps over theta, N or R.
    Sweep(Common),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("INCENTIVE_FORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| CliError::Invalid(format!("INCENTIVE_FORGE_THREADS={value} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn execute(args: Args) -> Result<(), CliError> {
    configure_threads()?;
    let (command, common, corrupt_gradient) = match args.command {
        Cmd::Evaluate(c) => (Command::Evaluate, c, None),
        Cmd::Gradcheck { common, corrupt_gradient } => (Command::Gradcheck, common, corrupt_gradient),
        Cmd::Optimize(c) => (Command::Optimize, c, None),
        Cmd::Simulate(c) => (Command::Simulate, c, None),
        Cmd::Scalar(c) => (Command::Scalar, c, None),
        Cmd::Sweep(c) => (Command::Sweep, c, None),
    };
    let scenario = Scenario::load(&common.scenario)?;
    let options = RunOptions {
        out_dir: common.out,
        seed: common.seed,
        corrupt_gradient,
    };
    for path in run(command, &scenario, &options)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
