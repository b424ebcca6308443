//! Thin command-line front end over the experiment runner.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for runtime
//! failures. `DDRAM_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddram::config::ExperimentConfig;
use ddram::runner::{
    cmd_convergence, cmd_local_error, cmd_plotdata, cmd_sample, cmd_validate, init_thread_pool,
    RunnerError,
};

#[derive(Parser)]
#[command(name = "ddram", version, about = "Randomized-midpoint diffusion sampler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run chains and write endpoint samples plus summary metrics.
    Sample(Common),
    /// One-step weak/strong error sweep over step sizes.
    LocalError(Common),
    /// Multi-sampler convergence study over NFE budgets.
    Convergence(Common),
    /// Self-check battery over the stochastic kernels.
    Validate(Common),
    /// Long-form plot data and an SVG chart from convergence results.
    Plotdata(Common),
}

fn run(common: &Common, f: impl Fn(&ExperimentConfig, &std::path::Path) -> Result<(), RunnerError>) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ddram: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match f(&cfg, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddram: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match &cli.command {
        Command::Sample(c) => run(c, cmd_sample),
        Command::LocalError(c) => run(c, cmd_local_error),
        Command::Convergence(c) => run(c, cmd_convergence),
        Command::Validate(c) => run(c, cmd_validate),
        Command::Plotdata(c) => run(c, cmd_plotdata),
    }
}
