//! Command-line surface for the gradanom toolkit.
//!
//! Subcommands: `gen` (anomaly maps from a mask manifest), `synth`
//! (deterministic test scenes), `eval` (instance-segmentation metrics),
//! `loss` (the two mask losses against predictions), `bench` (reference vs
//! optimized map-generation timings). JSON results go to standard output,
//! diagnostics to standard error, and every invocation exits 0 or 1.

pub mod commands;
pub mod gam1;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gradanom_core::{SigmaMode, WeightMode};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gradanom",
    version,
    about = "Gradient-anomaly maps, losses and metrics for overlapping instance masks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate joint and per-instance gradient-anomaly maps from a manifest.
    Gen(GenArgs),
    /// Synthesize a deterministic test scene and write it as a manifest.
    Synth(SynthArgs),
    /// Score a predicted segmentation against ground truth.
    Eval(EvalArgs),
    /// Compute the gradient-anomaly and mask-refinement losses.
    Loss(LossArgs),
    /// Time the reference vs optimized map generators.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// Scene manifest (JSON listing instance-mask PNGs).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Sliding-window size in pixels.
    #[arg(long)]
    pub ws: usize,
    /// Gradient-anomaly scale factor applied after normalization.
    #[arg(long)]
    pub fga: f64,
    /// Window statistic.
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Output directory for .gam files.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write 8-bit PNG visualizations (round(255*value/fga)).
    #[arg(long)]
    pub png: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scene template: overlap-pair, cross-bars, touch-squares, random-cluster.
    #[arg(long)]
    pub preset: String,
    /// RNG seed; same seed reproduces the scene byte-for-byte.
    #[arg(long)]
    pub seed: u64,
    /// Canvas dimensions as <H>x<W>, e.g. 64x64.
    #[arg(long)]
    pub size: String,
    /// Output directory for manifest.json and mask PNGs.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ground-truth manifest.
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction manifest.
    #[arg(long)]
    pub pred: PathBuf,
    /// JSON object mapping prediction instance id (as string) to confidence.
    #[arg(long)]
    pub scores: PathBuf,
}

#[derive(Args)]
pub struct LossArgs {
    /// Ground-truth manifest; GT anomaly maps are generated from it.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory holding predicted instance_<id>.gam maps.
    #[arg(long)]
    pub pred_grad: PathBuf,
    /// Predicted class probabilities: GAM1 container with K stacked planes.
    #[arg(long)]
    pub pred_prob: PathBuf,
    /// Sliding-window size for the GT maps.
    #[arg(long)]
    pub ws: usize,
    /// Gradient-anomaly scale factor for the GT maps.
    #[arg(long)]
    pub fga: f64,
    /// Refinement weighting: literal (anomaly * CE) or offset ((1 + anomaly) * CE).
    #[arg(long, value_enum)]
    pub weight_mode: WeightArg,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Square canvas size in pixels (>= 64).
    #[arg(long)]
    pub size: usize,
    /// Comma-separated window sizes, e.g. 3,5,12.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ws: Vec<usize>,
    /// Timing repeats per configuration; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    /// Plain standard deviation of pooled window angles.
    Std,
    /// Pairwise-difference statistic inside clean intersection windows.
    InteriorDiff,
}

impl From<ModeArg> for SigmaMode {
    fn from(m: ModeArg) -> SigmaMode {
        match m {
            ModeArg::Std => SigmaMode::Std,
            ModeArg::InteriorDiff => SigmaMode::InteriorDiff,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightArg {
    Literal,
    Offset,
}

impl From<WeightArg> for WeightMode {
    fn from(w: WeightArg) -> WeightMode {
        match w {
            WeightArg::Literal => WeightMode::Literal,
            WeightArg::Offset => WeightMode::Offset,
        }
    }
}

/// Parses argv, dispatches, and maps every outcome onto exit code 0 or 1.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests land on stdout and succeed; genuine
            // usage errors land on stderr and fail.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Gen(args) => commands::gen::run(&args),
        Cmd::Synth(args) => commands::synth::run(&args),
        Cmd::Eval(args) => commands::eval::run(&args),
        Cmd::Loss(args) => commands::loss::run(&args),
        Cmd::Bench(args) => commands::bench::run(&args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
