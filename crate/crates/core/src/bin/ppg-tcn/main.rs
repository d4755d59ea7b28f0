//! Command-line interface: synthesize data, train, cross-validate, search,
//! quantize and evaluate.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, unreadable inputs,
//! invalid configuration), 2 runtime error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ppg_tcn::nas::Axis;

#[derive(Parser)]
#[command(
    name = "ppg-tcn",
    version,
    about = "PPG heart-rate estimation with temporal convolutional networks"
)]
struct Cli {
    /// Print per-epoch progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-subject dataset container.
    Synth {
        #[arg(long, default_value_t = 6)]
        subjects: usize,
        #[arg(long, default_value_t = 10.0)]
        minutes: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override every subject's motion-artifact intensity (0 to 1).
        #[arg(long)]
        motion: Option<f32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the seed network; writes a checkpoint and a training-curve CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Curve CSV path (default: next to the checkpoint, `.curve.csv`).
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Leave-one-subject-out cross-validation; writes folds.csv and predictions.csv.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Channel-width search over a regularizer grid; writes every point and the Pareto front.
    Search {
        #[arg(long)]
        data: PathBuf,
        /// Grid TOML (default: strengths {1e-6,1e-5,1e-4} × thresholds {0.001,0.01,0.05} × both kinds).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Pareto CSV path (default: next to `--out`, `.pareto.csv`).
        #[arg(long)]
        pareto: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = AxisArg::Params)]
        axis: AxisArg,
    },
    /// Flatten dilations and quantize a float checkpoint to int8.
    Quantize {
        #[arg(long)]
        ckpt: PathBuf,
        /// Dataset container providing calibration windows.
        #[arg(long)]
        calib: PathBuf,
        /// Number of calibration windows, spread evenly over the dataset.
        #[arg(long, default_value_t = 512)]
        calib_windows: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint; prints the MAE and writes report and trace CSVs.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Clip predictions against the mean of recent outputs.
        #[arg(long)]
        postprocess: bool,
        /// Fine-tune per subject on its first windows (float checkpoints only).
        #[arg(long)]
        finetune: bool,
        /// Fine-tuning settings (`[finetune]` table).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report CSV path (printed to stdout when absent).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AxisArg {
    Params,
    Macs,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Params => Axis::Params,
            AxisArg::Macs => Axis::Macs,
        }
    }
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<ppg_tcn::Error> for Failure {
    fn from(e: ppg_tcn::Error) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command, cli.verbose) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
