//! `samp`: analyze signal files and run the Monte-Carlo experiments.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "samp", version, about = "Model-order detection and parameter estimation for sums of complex exponentials")]
pub struct Cli {
    /// Print progress to standard error; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the order and parameters of a signal stored as `re,im` CSV.
    Analyze(AnalyzeArgs),
    /// Run a preset or configured Monte-Carlo experiment and write metric CSVs.
    Simulate(SimulateArgs),
    /// Compare mode-based and least-squares amplitude estimation at full rank.
    BenchAmps(BenchAmpsArgs),
    /// List the available presets.
    Presets,
}

#[derive(Debug, Args)]
pub struct CommonConfig {
    /// TOML file with [experiment], [noise], [samp] and [classical] sections.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config entry, e.g. `--set samp.freq_oversample=16`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Signal file: one `re,im` row per sample, optional header.
    pub input: PathBuf,

    /// Directory receiving estimates.csv and features.csv.
    #[arg(short, long, default_value = ".")]
    pub out: PathBuf,

    /// Order detector: samp, or a classical one (sdd, gap, eff, aic, bic).
    #[arg(long, default_value = "samp")]
    pub detector: String,

    #[command(flatten)]
    pub common: CommonConfig,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named preset; see `samp presets`.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,

    /// Output directory.
    #[arg(short, long, default_value = "results")]
    pub out: PathBuf,

    /// Monte-Carlo trials per sweep point (default 500).
    #[arg(long)]
    pub trials: Option<usize>,

    /// Base seed of every random draw (default 0).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Comma-separated methods (default: SAMP,SDD,GAP,EFF,AIC,BIC).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,

    #[command(flatten)]
    pub common: CommonConfig,
}

#[derive(Debug, Args)]
pub struct BenchAmpsArgs {
    /// Signal lengths.
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,600")]
    pub samples: Vec<usize>,

    /// Number of exponentials.
    #[arg(long, default_value_t = 4)]
    pub order: usize,

    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub snr_db: f64,

    /// Noise draws per length.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,

    /// Timed repetitions per draw; the median is kept.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Directory receiving amplitudes.csv.
    #[arg(short, long, default_value = ".")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
