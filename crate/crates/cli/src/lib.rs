//! Batch front end of `fusemetrics`: dataset scanning, classical and
//! surrogate evaluation, probe and surrogate training, metric-consistency
//! reports and timing benchmarks.
//!
//! Everything the binary does is reachable through [`run`], which returns the
//! text the binary prints instead of printing it.

pub mod bench;
pub mod config;
pub mod error;
pub mod eval;
pub mod mc;
pub mod output;
pub mod synth;
pub mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub use config::{CommonArgs, EnvSource, RunConfig};
pub use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "fusemetrics", version, about = "Image-fusion quality metrics and metric-consistency tooling")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset (sources, 16 pseudo-methods, env labels)
    Synth(synth::SynthArgs),
    /// Classical metrics for every (scene, method) pair
    EvalClassical(eval::ClassicalArgs),
    /// Environment-adjusted scores from the trained surrogate
    EvalSurrogate(eval::SurrogateArgs),
    /// Train the decomposition probe
    TrainProbe(train::ProbeArgs),
    /// Train the surrogate evaluator
    TrainSurrogate(train::SurrogateArgs),
    /// Metric-consistency report from a score table
    Mc(mc::McArgs),
    /// Per-metric and surrogate timing
    Bench(bench::BenchArgs),
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct Report {
    /// Human-readable summary for stdout.
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = self.summary.clone();
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        for f in &self.files {
            out.push_str(&format!("wrote {}\n", f.display()));
        }
        out
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<Report, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Report {
                summary: e.to_string(),
                files: Vec::new(),
            })
        }
        Err(e) => return Err(CliError::new("Usage", e.to_string())),
    };
    let cfg = RunConfig::resolve(&cli.common)?;
    match &cli.command {
        Command::Synth(a) => synth::run(&cfg, a),
        Command::EvalClassical(a) => eval::run_classical(&cfg, a),
        Command::EvalSurrogate(a) => eval::run_surrogate(&cfg, a),
        Command::TrainProbe(a) => train::run_probe(&cfg, a),
        Command::TrainSurrogate(a) => train::run_surrogate(&cfg, a),
        Command::Mc(a) => mc::run(&cfg, a),
        Command::Bench(a) => bench::run(&cfg, a),
    }
}

/// Bounded pool used for image-level parallelism.
pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::new("Config", format!("thread pool: {e}")))
}
