use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gagliardo::cli_io::{cmd_diagnose, cmd_solve, cmd_sweep, CommandOptions};

/// Fractional harmonic maps: minimize discrete Gagliardo energies and probe
/// the regularity of the minimizers.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides the config's "output").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config's "seed").
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize from the configured boundary data.
    Solve { config: PathBuf },
    /// Run the configured probes on a saved field.
    Diagnose { config: PathBuf, snapshot: PathBuf },
    /// Solve and diagnose over a parameter grid.
    Sweep { config: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let opts = CommandOptions {
        out: cli.common.out,
        seed: cli.common.seed,
        force: cli.common.force,
    };
    match cli.command {
        Command::Solve { config } => {
            let summary = cmd_solve(&config, &opts).with_context(|| format!("solve {}", config.display()))?;
            println!(
                "energy {} after {} iterations ({:?}, converged: {})",
                summary.energy, summary.iterations, summary.stop_reason, summary.converged
            );
        }
        Command::Diagnose { config, snapshot } => {
            let lines = cmd_diagnose(&config, &snapshot, &opts).with_context(|| format!("diagnose {}", config.display()))?;
            for line in lines {
                println!("{line}");
            }
        }
        Command::Sweep { config } => {
            let rows = cmd_sweep(&config, &opts).with_context(|| format!("sweep {}", config.display()))?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} points, {failed} failed", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
