//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags. The seed additionally falls back to `FUSEMETRICS_SEED`.

use std::path::{Path, PathBuf};

use clap::Args;
use fusemetrics::consistency::ConsistencyParams;
use fusemetrics::metrics::{MetricId, VanillaWeights};
use serde::Deserialize;

use crate::error::CliError;

pub const SEED_ENV: &str = "FUSEMETRICS_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EnvSource {
    File,
    Heuristic,
}

/// Flags shared by every subcommand; each command reads the ones it needs.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// TOML file with any of the keys below (underscored)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated metric names, e.g. PSNR,SSIM,FMI_W
    #[arg(long, global = true)]
    pub metrics: Option<String>,
    /// Weighted-sum source weights as "ir,vis"
    #[arg(long, global = true)]
    pub weights: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub env: Option<EnvSource>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long = "s", global = true)]
    pub s: Option<f64>,
}

/// Keys accepted in the config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub metrics: Option<Vec<String>>,
    pub weights: Option<[f64; 2]>,
    pub env: Option<EnvSource>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub s: Option<f64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub heads: Option<usize>,
    pub probe_methods: Option<Vec<String>>,
    pub scenes: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub count: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new("Config", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::new("Config", format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    pub metrics: Vec<MetricId>,
    pub weights: VanillaWeights,
    pub env_source: EnvSource,
    pub workers: usize,
    pub seed: u64,
    pub consistency: ConsistencyParams,
    pub file: FileConfig,
}

fn parse_metrics(items: &[String]) -> Result<Vec<MetricId>, CliError> {
    let mut out: Vec<MetricId> = Vec::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let m: MetricId = item.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::new("Config", "metric list is empty"));
    }
    // canonical column order
    Ok(MetricId::ALL.into_iter().filter(|m| out.contains(m)).collect())
}

fn parse_weights(text: &str) -> Result<[f64; 2], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::new("Config", format!("--weights expects \"ir,vis\", got {text:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok([parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?])
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let metrics = match (&args.metrics, &file.metrics) {
            (Some(flag), _) => parse_metrics(&flag.split(',').map(str::to_owned).collect::<Vec<_>>())?,
            (None, Some(list)) => parse_metrics(list)?,
            (None, None) => MetricId::ALL.to_vec(),
        };
        let [w_ir, w_vis] = match (&args.weights, file.weights) {
            (Some(flag), _) => parse_weights(flag)?,
            (None, Some(w)) => w,
            (None, None) => [1.0, 1.0],
        };
        let workers = args.workers.or(file.workers).unwrap_or(1);
        if workers == 0 {
            return Err(CliError::new("Config", "workers must be >= 1"));
        }
        let seed = match args.seed.or(file.seed) {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::new("Config", format!("{SEED_ENV}={v:?} is not an integer")))?,
                Err(_) => 0,
            },
        };
        let consistency = ConsistencyParams::new(
            args.alpha.or(file.alpha).unwrap_or(fusemetrics::consistency::DEFAULT_ALPHA),
            args.beta.or(file.beta).unwrap_or(fusemetrics::consistency::DEFAULT_BETA),
            args.s.or(file.s).unwrap_or(fusemetrics::consistency::DEFAULT_S),
        )?;
        Ok(RunConfig {
            dataset: args.dataset.clone().or(file.dataset.clone()),
            output: args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            metrics,
            weights: VanillaWeights::new(w_ir, w_vis)?,
            env_source: args.env.or(file.env).unwrap_or(EnvSource::File),
            workers,
            seed,
            consistency,
            file,
        })
    }

    pub fn dataset_root(&self) -> Result<&Path, CliError> {
        self.dataset.as_deref().ok_or_else(|| CliError::new("Config", "no dataset given (--dataset)"))
    }

    pub fn ensure_output(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.output)
            .map_err(|e| CliError::new("Io", format!("{}: {e}", self.output.display())))?;
        Ok(&self.output)
    }
}
