mod commands;
mod manifest;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thermoflux_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "thermoflux",
    version,
    about = "Coupled conduction-radiation slab solver and LSTM surrogate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run one simulation and write the profile CSV
    Simulate,
    /// Run a parameter sweep and write a training dataset
    Dataset,
    /// Train the surrogate on a dataset
    Train,
    /// Predict a dataset with a trained surrogate
    Predict,
    /// Score a surrogate against a dataset
    Evaluate,
    /// Compare a solver profile with surrogate temperatures
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Simulation config (simulate, dataset) or surrogate config (train), JSON
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub radiation: Option<Toggle>,
    /// Dataset CSV (train, predict, evaluate)
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Model checkpoint; `identity` selects the pass-through predictor in compare
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Profile CSV (compare)
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,
    /// Sweep over a config key, e.g. `bc.ramp_rate=50,100`; repeat for a grid
    #[arg(long, global = true)]
    pub sweep: Vec<String>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Convergence { .. } => 3,
        Error::TrainingDiverged { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cli.opts),
        Command::Dataset => commands::dataset(&cli.opts),
        Command::Train => commands::train(&cli.opts),
        Command::Predict => commands::predict(&cli.opts),
        Command::Evaluate => commands::evaluate(&cli.opts),
        Command::Compare => commands::compare(&cli.opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
