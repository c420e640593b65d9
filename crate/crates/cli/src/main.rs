use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use teachctl_core::Error;

#[derive(Parser, Debug)]
#[command(name = "teachctl", version, about = "Mask-ratio and pseudo-label threshold controllers for teacher-student self-training")]
struct Cli {
    /// Log filter, e.g. `info` or `teachctl=debug`.
    #[arg(long, global = true, env = "TEACHCTL_LOG", default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the synthetic self-training harness and write CSV/JSON reports.
    Simulate(SimulateArgs),
    /// Filter a COCO-style detection dump with fixed or logged thresholds.
    Filter(FilterArgs),
    /// Replay the mask-ratio controller on a loss sequence, one row per epoch.
    ScheduleTrace(ScheduleTraceArgs),
    /// Tabulate both smoothing-coefficient curves over a run.
    GammaTrace(GammaTraceArgs),
    /// Continue a run from a checkpoint.
    Resume(ResumeArgs),
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output directory. Overrides the config's `output_dir`.
    #[arg(long, env = "TEACHCTL_OUT_DIR")]
    out: Option<PathBuf>,

    /// Write `checkpoint-<iter>.json` into the output directory after this many iterations.
    #[arg(long, value_name = "ITER")]
    checkpoint_at: Vec<u64>,

    /// Stop after this many completed iterations (reports cover the partial run).
    #[arg(long, value_name = "ITER")]
    stop_after: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON run configuration. Omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Freeze the mask ratio at this value.
    #[arg(long, value_name = "MU")]
    fixed_mask_ratio: Option<f64>,

    /// Use this threshold for every class instead of the adaptive one.
    #[arg(long, value_name = "N")]
    fixed_threshold: Option<f64>,

    /// Copy the student into the teacher every step instead of averaging.
    #[arg(long)]
    no_teacher: bool,

    /// Run this many consecutive seeds in parallel, each under `seed-<s>/`.
    #[arg(long, default_value_t = 1)]
    replicas: u32,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["threshold", "thresholds", "trajectory"])))]
struct FilterArgs {
    /// COCO results JSON: `[{"image_id", "category_id", "bbox", "score"}, ...]`.
    #[arg(long)]
    results: PathBuf,

    /// One threshold for every class.
    #[arg(long)]
    threshold: Option<f64>,

    /// JSON object mapping class id to threshold.
    #[arg(long)]
    thresholds: Option<PathBuf>,

    /// `thresholds.csv` written by `simulate`.
    #[arg(long)]
    trajectory: Option<PathBuf>,

    /// Iteration of the trajectory to use; defaults to the last one.
    #[arg(long, requires = "trajectory")]
    iter: Option<u64>,

    /// Ground truth (array or `{"annotations": [...]}`) for precision/recall/F1.
    #[arg(long)]
    gt: Option<PathBuf>,

    #[arg(long, default_value_t = 0.5)]
    iou: f64,

    /// Kept detections; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON report with per-class counts and metrics.
    #[arg(long)]
    report: Option<PathBuf>,

    /// Per-class metrics table (needs `--gt`).
    #[arg(long, requires = "gt")]
    metrics_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScheduleTraceArgs {
    /// Run configuration supplying the scheduler settings.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Number of epochs; defaults to the scheduler's `total_epochs`.
    #[arg(long)]
    epochs: Option<u64>,

    /// Loss per epoch, whitespace or comma separated. Overrides the generated sequence.
    #[arg(long)]
    losses: Option<PathBuf>,

    /// Seed for the generated sequence (decaying trend plus uniform noise).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 0.05)]
    noise: f64,

    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GammaTraceArgs {
    #[arg(long, default_value_t = 100)]
    total: u64,

    #[arg(long, default_value_t = 10.0)]
    alpha_at: f64,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResumeArgs {
    checkpoint: PathBuf,

    #[command(flatten)]
    output: OutputArgs,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Domain(_) => 2,
        Error::Io { .. } => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Filter(a) => commands::filter(a),
        Command::ScheduleTrace(a) => commands::schedule_trace(a),
        Command::GammaTrace(a) => commands::gamma_trace(a),
        Command::Resume(a) => commands::resume(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("teachctl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
