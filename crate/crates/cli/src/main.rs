use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use padicwalk_cli::config::SEED_ENV;
use padicwalk_cli::{run, Command, RunOptions};

/// Heat kernels, random walks and first-passage times on Q_p^n.
#[derive(Parser, Debug)]
#[command(name = "padicwalk", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// RNG seed; overrides the environment and the config.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions { command: cli.command, config: cli.config, seed: cli.seed, workers: cli.workers, out: cli.out };
    match run(&opts) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
