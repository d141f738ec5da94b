//! `gpcert`: fit a model, certify it, sample it, sweep `σ̄²` and summarise.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "gpcert", version, about = "Robustness certificates for Gaussian-process predictions")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fit the GP and store the model artifact.
    Fit,
    /// Certificates for every configured point, budget and threshold.
    Certify,
    /// Sampling estimates on a grid around every configured point.
    Baseline,
    /// Normalised variance over network depth and training-set size.
    Variance,
    /// Summarise the output directory.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Fit => commands::fit(&cli.config, &cli.out),
        Command::Certify => commands::certify(&cli.config, &cli.out),
        Command::Baseline => commands::baseline(&cli.config, &cli.out),
        Command::Variance => commands::variance(&cli.config, &cli.out),
        Command::Report => commands::report(&cli.config, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
