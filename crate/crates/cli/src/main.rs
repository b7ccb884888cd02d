//! `gda` — simulate, certify, classify, and sweep gradient descent-ascent
//! dynamics from a JSON config.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config validation failure.

use clap::{Args, Parser, Subcommand};
use gda_cli::commands;
use gda_cli::config::{parse_config, ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gda",
    version,
    about = "Gradient descent-ascent laboratory: simulate the flow, certify convergence/boundedness, classify trajectories, sweep parameter grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate each start state; write trajectory CSVs and energy audits
    Simulate(RunArgs),
    /// Check the convergence/boundedness conditions; write certificate.json
    Certify(RunArgs),
    /// Label each start's trajectory; write classifications.json
    Classify(RunArgs),
    /// Run certificate + verdict over a parameter grid; write sweep.csv
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for sweep cells and multiple starts
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides output_dir from the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ConfigError {
        path: String::new(),
        message: format!("cannot read config {}: {e}", args.config.display()),
    })?;
    let seed_override = match std::env::var("GDA_SEED") {
        Ok(raw) => Some(raw.parse::<u64>().map_err(|_| ConfigError {
            path: String::new(),
            message: format!("GDA_SEED must be a nonnegative integer, got '{raw}'"),
        })?),
        Err(_) => None,
    };
    parse_config(&text, seed_override)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Certify(a) => ("certify", a),
        Command::Classify(a) => ("classify", a),
        Command::Sweep(a) => ("sweep", a),
    };

    let config = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    let run = || match commands::run_command(name, &config, &out_dir) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    };

    match args.jobs {
        Some(jobs) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            pool.install(run)
        }
        None => run(),
    }
}
