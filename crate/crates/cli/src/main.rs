//! `agglom`: synthesize training data, train the networks, measure primary
//! particle size distributions and compare against classical baselines.

mod baseline;
mod distortions;
mod evaluate;
mod manifest;
mod measure;
mod sweep;
mod synth;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use agglom_core::baselines::Method;

#[derive(Parser)]
#[command(
    name = "agglom",
    version,
    about = "Primary particle sizing of agglomerates on TEM-like images"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Estimate blur, noise and illumination distributions of real images.
    AnalyzeDistortions(DistortionArgs),
    /// Train the number network and/or area networks into a model bundle.
    Train(TrainArgs),
    /// Measure primary particle areas and the size distribution of images.
    Measure(MeasureArgs),
    /// Run or tune a classical baseline.
    Baseline(BaselineArgs),
    /// Compare predictions with synthesis ground truth.
    Evaluate(EvaluateArgs),
    /// Sample-count or hidden-neuron sweep with a rational fit.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// TOML with [render], [distortions] and [classes] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Images per class, e.g. 1:100,2:100; overrides [classes].
    #[arg(long)]
    pub counts: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON distortion distributions (as written by analyze-distortions);
    /// overrides [distortions].
    #[arg(long)]
    pub distortions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DistortionArgs {
    /// Directory of real images (PNG or PGM).
    #[arg(long)]
    pub images: PathBuf,
    /// Sharp reference image for the blur calibration curve.
    #[arg(long)]
    pub reference: PathBuf,
    /// Blur sigmas of the calibration grid, px.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.25,0.5,0.75,1,1.25,1.5,2,2.5,3,4"
    )]
    pub sigmas: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Which network `--net` selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum NetKind {
    Number,
    Area(usize),
    All,
}

impl FromStr for NetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "number" => Ok(NetKind::Number),
            "all" => Ok(NetKind::All),
            _ => {
                let k = s
                    .strip_prefix("area:")
                    .and_then(|k| k.parse::<usize>().ok());
                match k {
                    Some(k @ 1..=5) => Ok(NetKind::Area(k)),
                    _ => Err(format!(
                        "expected number, area:K with K in 1..=5, or all; got `{s}`"
                    )),
                }
            }
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "all")]
    pub net: NetKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long, default_value_t = 6)]
    pub patience: usize,
    /// Bundle directory; networks already present are kept.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Directory of images to measure.
    #[arg(long)]
    pub images: PathBuf,
    /// Histogram bins.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub method: MethodArg,
    /// Baseline parameters TOML; defaults are used when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Directory of images to process.
    #[arg(long, required_unless_present = "tune")]
    pub images: Option<PathBuf>,
    /// Grid-search the method's parameters on a synthetic dataset instead.
    #[arg(long, value_name = "DATASET")]
    pub tune: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy)]
pub struct MethodArg(pub Method);

impl FromStr for MethodArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse::<Method>()
            .map(MethodArg)
            .map_err(|e| e.to_string())
    }
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Output directory of `measure` or `baseline`.
    #[arg(long)]
    pub pred: PathBuf,
    /// `labels.jsonl` of the synthetic dataset.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write report.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Samples,
    Hidden,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "number")]
    pub net: NetKind,
    /// Samples per class (samples) or hidden neurons (hidden).
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    /// Number of training seeds per grid point.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Early-stopping patience; 0 trains for all epochs.
    #[arg(long, default_value_t = 0)]
    pub patience: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn patience(p: usize) -> Option<usize> {
    (p > 0).then_some(p)
}

/// PNG and PGM files directly under `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if p.is_file() && matches!(ext.as_deref(), Some("png" | "pgm")) {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no PNG or PGM images in {}", dir.display());
    }
    Ok(out)
}

pub fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::AnalyzeDistortions(a) => distortions::run(a),
        Command::Train(a) => train::run(a),
        Command::Measure(a) => measure::run(a),
        Command::Baseline(a) => baseline::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Sweep(a) => sweep::run(a),
    }
}

/// Causes joined with `: `, skipping those already quoted by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    let mut last = msg.clone();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !last.ends_with(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
        last = c;
    }
    msg
}

/// Print to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AGGLOM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn net_kind_parses() {
        assert_eq!("number".parse::<NetKind>().unwrap(), NetKind::Number);
        assert_eq!("area:3".parse::<NetKind>().unwrap(), NetKind::Area(3));
        assert!("area:6".parse::<NetKind>().is_err());
        assert!("area:".parse::<NetKind>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
