//! Command-line front end: every run is described by a TOML file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{Failure, Run, EXIT_CONFIG};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "rfrboost", version, about = "Random feature representation boosting")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<String, Failure> {
    let mut config = RunConfig::load(&cli.config).map_err(Failure::config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base_dir = cli
        .config
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    Run {
        config,
        base_dir,
        out: cli.out,
    }
    .execute()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
