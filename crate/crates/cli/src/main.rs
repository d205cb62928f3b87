mod commands;
mod error;
mod input;
mod rot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::rot::DEFAULT_BINS;

/// Minimax estimation and finite-sample inference for regression discontinuity designs with binary outcomes.
#[derive(Debug, Parser)]
#[command(name = "rdbinary", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimax weights for every observation.
    Weights {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        smooth: SmoothArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Point estimate and its certified worst-case root MSE.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        smooth: SmoothArgs,
        /// Weights exported by the `weights` command, used instead of solving.
        #[arg(long)]
        weights_file: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Confidence interval for the jump at the cutoff.
    Ci {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        smooth: SmoothArgs,
        #[command(flatten)]
        inference: InferenceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Intervals at several cutoffs plus a pooled interval on recentered data.
    MultiCutoff {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        cutoffs: Vec<f64>,
        #[command(flatten)]
        smooth: SmoothArgs,
        #[command(flatten)]
        inference: InferenceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rule-of-thumb Lipschitz constant from binned means.
    RotC {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo study on an equally spaced design.
    Simulate {
        /// One of `flat`, `worst-case`, `lee`.
        #[arg(long, default_value = "flat")]
        dgp: String,
        /// Slope of the worst-case design; defaults to `--C`.
        #[arg(long = "dgp-C")]
        dgp_c: Option<f64>,
        /// Coefficient file for the `lee` design (`control = [...]`, `treated = [...]`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Lipschitz constant used by the estimators.
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 3000)]
        reps: usize,
        #[arg(long, default_value_t = 1500)]
        ci_reps: usize,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "rdbinary,gauss,local_mean"
        )]
        estimators: Vec<String>,
        #[command(flatten)]
        inference: InferenceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Worst-case root-MSE ratio of Gaussian-model weights to minimax weights on equally spaced designs.
    CompareGauss {
        #[arg(long = "n", value_delimiter = ',', default_value = "50,500")]
        ns: Vec<usize>,
        #[arg(long = "C", value_delimiter = ',', default_value = "1")]
        cs: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with header `r,y`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    cutoff: f64,
}

#[derive(Debug, Args)]
struct SmoothArgs {
    /// Lipschitz constant of the conditional outcome probabilities.
    #[arg(long = "C", conflicts_with = "rot")]
    c: Option<f64>,
    /// Use the rule-of-thumb constant computed from the data.
    #[arg(long)]
    rot: bool,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HoeffdingArg {
    One,
    Naive,
    Optimized,
}

#[derive(Debug, Args)]
struct InferenceArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = rdbinary::inference::DEFAULT_SIMS)]
    sims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    #[arg(long, default_value_t = rdbinary::inference::DEFAULT_INFERENCE_ANCHORS)]
    anchors: usize,
    #[arg(long, default_value_t = rdbinary::inference::DEFAULT_BISECTION_STEPS)]
    bisection_steps: usize,
    /// Report a Hoeffding interval instead of the calibrated one.
    #[arg(long, value_enum)]
    hoeffding: Option<HoeffdingArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
