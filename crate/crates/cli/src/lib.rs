//! Command line and file formats for `misreport-core`.
//!
//! ```text
//! misreport fit|simulate|predict --config <path> [--seed N] [--iters N] [--burnin N] [--out DIR] [--round N]
//! ```
//!
//! Exit codes: 0 on success, 2 for configuration or data errors, 3 when a
//! sampler fails numerically, 1 when an output file cannot be written.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod figures;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Overrides;
pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "misreport", version, about = "Survey-weighted Bayesian models for misreported categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset.
    Fit(CommonArgs),
    /// Run the informative-sampling replication study.
    Simulate(CommonArgs),
    /// Per-draw outcome probabilities from a covariate-me fit.
    Predict(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Round summary tables to this many decimals.
    #[arg(long)]
    round: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            iterations: self.iters,
            burn_in: self.burnin,
            out: self.out.clone(),
            round: self.round,
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (args, run): (&CommonArgs, fn(&RunConfig, &Overrides) -> CliResult<PathBuf>) = match &cli.command {
        Command::Fit(a) => (a, commands::fit),
        Command::Simulate(a) => (a, commands::simulate),
        Command::Predict(a) => (a, commands::predict),
    };
    let result = RunConfig::load(&args.config).and_then(|cfg| run(&cfg, &args.overrides()));
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
