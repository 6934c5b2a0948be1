mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "trilinear",
    version,
    about = "Three-mode down-conversion with a quantized pump"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the cumulative phase of a squeezed coherent state (classical pump).
    Tmscs,
    /// Evaluate the short-time series for each phase.
    Perturb,
    /// Integrate the full three-mode dynamics and record observables.
    Evolve,
    /// Average late-time densities, fit chain constants and report thermal gaps.
    Steady,
    /// Run the cross-validation battery.
    Validate,
}

fn dispatch(cli: &Cli) -> CliResult<commands::Written> {
    match cli.command {
        Command::Tmscs => commands::tmscs::run(&cli.overrides),
        Command::Perturb => commands::perturb::run(&cli.overrides),
        Command::Evolve => commands::evolve::run(&cli.overrides),
        Command::Steady => commands::steady::run(&cli.overrides),
        Command::Validate => commands::validate::run(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
