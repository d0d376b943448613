use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Lightweight single-shot detector toolkit: inference, evaluation,
/// benchmarking, design-space sweeps and loss verification.
#[derive(Debug, Parser)]
#[command(name = "aerodet", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the detector on one PPM image and print `class score cx cy w h` lines.
    Detect(DetectArgs),
    /// Evaluate a model on an annotated image list.
    Eval(EvalArgs),
    /// Time forward passes and print a CSV latency report.
    Bench(BenchArgs),
    /// Evaluate and benchmark every model × input size and rank by weighted score.
    Sweep(SweepArgs),
    /// Compare analytic loss and network gradients with finite differences.
    GradCheck(GradCheckArgs),
    /// Overfit a small network on a single image with plain gradient descent.
    TrainToy(TrainToyArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Network config file or reference model name.
    #[arg(long)]
    config: String,
    /// Darknet weights file.
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Minimum objectness × class probability.
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// IoU above which NMS suppresses the lower-scoring box.
    #[arg(long, default_value_t = 0.45)]
    nms: f64,
    /// Drop boxes whose normalized area is below this.
    #[arg(long, requires = "max_area")]
    min_area: Option<f64>,
    /// Drop boxes whose normalized area is above this.
    #[arg(long, requires = "min_area")]
    max_area: Option<f64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Input image (binary PPM).
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write detections here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Text file listing one image path per line.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// IoU needed for a detection to match a ground truth.
    #[arg(long, default_value_t = 0.5)]
    match_iou: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: EvalFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Network config file or reference model name.
    #[arg(long)]
    config: String,
    /// Weights file; random weights seeded by `--seed` when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 416)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Sweep config file of `key = value` lines; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated model names or config paths.
    #[arg(long)]
    models: Option<String>,
    /// Comma-separated input sizes.
    #[arg(long)]
    sizes: Option<String>,
    /// Four comma-separated weights: FPS, IoU, sensitivity, precision.
    #[arg(long)]
    score_weights: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    conf: Option<f64>,
    #[arg(long)]
    nms: Option<f64>,
    #[arg(long)]
    match_iou: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: SweepFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step for the loss check.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Random loss instances to check.
    #[arg(long, default_value_t = 20)]
    instances: usize,
}

#[derive(Debug, Args)]
struct TrainToyArgs {
    /// Training image (binary PPM); a synthetic scene is used when absent.
    #[arg(long, requires = "annotation")]
    image: Option<PathBuf>,
    /// Annotation file for `--image`.
    #[arg(long, requires = "image")]
    annotation: Option<PathBuf>,
    /// Network config file or reference model name.
    #[arg(long, default_value = "toy")]
    config: String,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = aerodet::train::DEFAULT_LEARNING_RATE)]
    lr: f64,
    /// Seed of the initial weights.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the trained weights here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the `step,loss` trajectory here instead of standard output.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match std::panic::catch_unwind(|| commands::run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(2),
    }
}
