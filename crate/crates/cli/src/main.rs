use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quanneal_cli::run::{run_experiment, Subcommand as Cmd};
use quanneal_cli::{CliError, ExperimentConfig};

/// Finite-temperature spin-model toolkit: Gibbs ground states, certified
/// annealing schedules, Schrodinger propagation, and path-integral Monte
/// Carlo.
#[derive(Parser)]
#[command(name = "quanneal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Check the Gibbs-ground-state construction, identities, and bounds.
    Verify(RunArgs),
    /// Generate a schedule and propagate the Schrodinger equation along it.
    Anneal(RunArgs),
    /// Sample the Trotterized model with Metropolis dynamics.
    Pimc(RunArgs),
    /// Emit the control path T(t) or gamma(t) without propagation.
    Schedule(RunArgs),
    /// Decompose the thermal diagonal into an Ising polynomial.
    Decompose(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Commands::Verify(a) => (Cmd::Verify, a),
        Commands::Anneal(a) => (Cmd::Anneal, a),
        Commands::Pimc(a) => (Cmd::Pimc, a),
        Commands::Schedule(a) => (Cmd::Schedule, a),
        Commands::Decompose(a) => (Cmd::Decompose, a),
    };
    match execute(cmd, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Cmd, args: &RunArgs) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::Io {
        path: args.config.display().to_string(),
        source: e,
    })?;
    let config = ExperimentConfig::parse(&text)?;
    let report = run_experiment(cmd, &config, &args.out, args.seed)?;

    for check in &report.checks {
        println!(
            "check {}: {} (value {:.6e}, threshold {:.6e})",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.value,
            check.threshold
        );
    }
    for (name, value) in &report.metrics {
        println!("metric {name} = {value:.6e}");
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("report: {}", args.out.join("report.json").display());

    let failed = report.failed_checks();
    if failed > 0 {
        let err = CliError::ChecksFailed {
            failed,
            total: report.checks.len(),
        };
        eprintln!("error: {err}");
        return Ok(ExitCode::from(err.exit_code() as u8));
    }
    Ok(ExitCode::SUCCESS)
}
