use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpo_cli::{execute, parse_config, CliError, Scenario};

/// Coherent-population-oscillation deflection simulator.
///
/// Exit status: 0 when every embedded check passes, 1 on a run error,
/// 2 when the run finished but a check failed.
#[derive(Debug, Parser)]
#[command(name = "cpo-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probe response spectrum and CPO hole metrics.
    Spectrum(RunArgs),
    /// Control-beam soliton propagation.
    Soliton(RunArgs),
    /// One probe deflection run against the endpoint law.
    Deflect(RunArgs),
    /// Deflection over a grid of offsets and detunings.
    Sweep(RunArgs),
    /// Factorized-propagator checks against grid propagation.
    WnCheck(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `block.key=value` patch applied after reading the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(scenario: Scenario, args: RunArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let resolved = parse_config(&text, scenario, &args.overrides)?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from(&resolved.config.output.dir));
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let outcome = execute(&resolved, &dir, args.jobs)?;
    for check in &outcome.report.checks {
        let status = if check.passed { "ok  " } else { "FAIL" };
        let value = check.value.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        println!("{status} {:<40} {value:>11}  {}", check.name, check.detail);
    }
    if !outcome.complete {
        println!("outputs are incomplete; see metadata.json");
    }
    println!("wrote {} files to {}", outcome.written.len(), dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::Spectrum(a) => (Scenario::Spectrum, a),
        Command::Soliton(a) => (Scenario::Soliton, a),
        Command::Deflect(a) => (Scenario::Deflect, a),
        Command::Sweep(a) => (Scenario::Sweep, a),
        Command::WnCheck(a) => (Scenario::WnCheck, a),
    };
    match run(scenario, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
