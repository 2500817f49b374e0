use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twocell::experiment;

#[derive(Parser)]
#[command(
    name = "twocell",
    version,
    about = "Two-cell downlink cooperation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV/JSON results.
    Run { config: PathBuf },
    /// Check a config without executing it.
    Validate { config: PathBuf },
    /// Print the crate version.
    Version,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => match experiment::run(&config) {
            Ok(summary) => {
                println!(
                    "{}: {} trials, {} summary rows (config {})",
                    summary.experiment,
                    summary.n_trials,
                    summary.results.len(),
                    &summary.config_hash[..12],
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Validate { config } => {
            let result = experiment::ExperimentConfig::from_path(&config)
                .and_then(|c| c.validate().map(|()| c));
            match result {
                Ok(_) => {
                    println!("valid");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("invalid: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Version => {
            println!("twocell {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}
