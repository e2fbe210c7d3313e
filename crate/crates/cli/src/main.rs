mod checks;
mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::{Failure, EXIT_VIOLATION};

/// Leading-order metastability analysis of epsilon-parametrized Markov chains.
#[derive(Debug, Parser)]
#[command(name = "valleyscope", version)]
struct Cli {
    /// Worker threads for parallel sections; all cores when unset.
    #[arg(long, env = "VALLEYSCOPE_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the valley hierarchy and check its hypotheses.
    Analyze(AnalyzeArgs),
    /// Run one Monte-Carlo check of a hierarchy level.
    Simulate(SimulateArgs),
    /// Compare leading-order quantities with exact finite-epsilon solves.
    Validate(ValidateArgs),
    /// Decompose the generator at one epsilon into weighted cycles.
    Cycles(CyclesArgs),
    /// Write a random strongly connected chain.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Epsilon grid for the exponent fits embedded in the report.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    eps_grid: Vec<f64>,
    /// Leave the exponent fits out of the report.
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Exit,
    Delta,
    Coverage,
    Generator,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    spec: PathBuf,
    /// Hierarchy level, counted from 1.
    #[arg(long)]
    level: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    replicas: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    check: Check,
    /// Restrict exit and coverage checks to the valley holding this state.
    #[arg(long)]
    valley: Option<String>,
    /// Run length per replica for the separating-set check, in time-scale units.
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Total simulated time for the generator estimate, in time-scale units.
    #[arg(long, default_value_t = 4000.0)]
    budget: f64,
    /// Give up on a replica after this many time-scale units.
    #[arg(long, default_value_t = valleyscope_core::simulate::SAFETY_HORIZON)]
    safety_horizon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one trajectory as CSV (time, state).
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    /// Start state of the exported trajectory; the first state when unset.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    spec: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    eps_grid: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every fitted series as CSV (quantity, epsilon, value, predicted).
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CyclesArgs {
    spec: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Seed of the sector-constant probe.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    states: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Input("VALLEYSCOPE_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Internal(e.to_string()))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Cycles(a) => commands::cycles(&a),
        Command::Generate(a) => commands::generate(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("valleyscope: {e}");
            ExitCode::from(e.code())
        }
    }
}
