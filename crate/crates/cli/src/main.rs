//! `pauligeo` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 size guard, 4 numerical
//! precondition. Outputs are only written once a run has validated.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pauligeo", version, about = "Lie-algebraic circuit analysis, Pauli geodesics and loss-variance sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the sample count in the config (variance, twirl).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Suppress the summary line on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Lie closure and ideal decomposition of a generator set; writes dla.json.
    Dla(Common),
    /// Straight-line Pauli geodesic, its length and a minimality probe;
    /// writes geodesic.json.
    Geodesic(Common),
    /// Loss variance over one or more (n, layers) points; writes
    /// variance.json and variance.csv.
    #[command(after_long_help = VARIANCE_HELP)]
    Variance(Common),
    /// Moment operators and Haar invariance tests; writes twirl.json.
    Twirl(Common),
}

const VARIANCE_HELP: &str = "\
CSV columns (one row per sweep point, in config order):
  n, layers, samples, mean, variance, variance_se, theoretical, gap,
  ideal_dims, rho_purities, observable_purities, rho_in_algebra,
  observable_in_algebra, two_design_distance, two_design_noise, evaluator,
  error
Floats carry 17 significant digits. List-valued columns are joined with ';'.
two_design_distance is \"unchecked\" unless the config requests the check.
A point that fails keeps its row with the message in the error column.";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (opts, result) = match &cli.command {
        Command::Dla(o) => (o, commands::dla(o)),
        Command::Geodesic(o) => (o, commands::geodesic(o)),
        Command::Variance(o) => (o, commands::variance(o)),
        Command::Twirl(o) => (o, commands::twirl(o)),
    };
    match result {
        Ok(summary) => {
            if !opts.quiet {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
