use std::path::PathBuf;

use clap::Args;
use fusemetrics::dataset::Dataset;
use fusemetrics::decomposition::{train_probe, ProbeSample};
use fusemetrics::nn::TrainConfig;
use fusemetrics::surrogate::{train, SurrogateScene, DEFAULT_HEADS};
use rayon::prelude::*;

use crate::error::CliError;
use crate::eval::{load_probe, scene_env};
use crate::output::{fmt_f64, write_csv};
use crate::{pool, Report, RunConfig};

pub const DEFAULT_PROBE_EPOCHS: usize = 40;
pub const DEFAULT_PROBE_METHODS: [&str; 3] = ["average", "max", "laplacian_blend"];

#[derive(Args, Debug, Clone, Default)]
pub struct Hyper {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl Hyper {
    fn resolve(&self, cfg: &RunConfig, default_epochs: usize) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.or(cfg.file.learning_rate).unwrap_or(d.learning_rate),
            batch_size: self.batch_size.or(cfg.file.batch_size).unwrap_or(d.batch_size),
            epochs: self.epochs.or(cfg.file.epochs).unwrap_or(default_epochs),
            seed: cfg.seed,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub hyper: Hyper,
    /// Comma-separated methods; scene i trains on method i mod k
    #[arg(long)]
    pub probe_methods: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SurrogateArgs {
    #[command(flatten)]
    pub hyper: Hyper,
    /// Probe used to decompose the fused images
    #[arg(long)]
    pub probe: Option<PathBuf>,
    /// Number of metric heads (first N full-reference metrics)
    #[arg(long)]
    pub heads: Option<usize>,
}

pub fn run_probe(cfg: &RunConfig, a: &ProbeArgs) -> Result<Report, CliError> {
    let ds = Dataset::scan(cfg.dataset_root()?)?;
    let methods: Vec<String> = match (&a.probe_methods, &cfg.file.probe_methods) {
        (Some(flag), _) => flag.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        (None, Some(list)) => list.clone(),
        (None, None) => DEFAULT_PROBE_METHODS.iter().map(|s| s.to_string()).collect(),
    };
    if methods.is_empty() {
        return Err(CliError::new("Config", "probe_methods is empty"));
    }
    if let Some(m) = methods.iter().find(|m| !ds.methods.contains(m)) {
        return Err(CliError::new("LayoutError", format!("dataset has no method {m:?}")));
    }
    let tc = a.hyper.resolve(cfg, DEFAULT_PROBE_EPOCHS);
    let out = cfg.ensure_output()?;
    let pool = pool(cfg.workers)?;
    let samples = pool.install(|| {
        ds.scenes
            .par_iter()
            .enumerate()
            .map(|(i, scene)| {
                let t = ds.load_triple(scene, &methods[i % methods.len()])?;
                Ok(ProbeSample::new(t.ir, t.vis, t.fused)?)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let trained = pool.install(|| train_probe(&samples, &tc))?;
    let path = out.join("probe.bin");
    let bytes = trained.params.save(&path)?;
    let rows: Vec<Vec<String>> = trained
        .curve
        .iter()
        .map(|e| vec![e.epoch.to_string(), fmt_f64(e.loss), fmt_f64(e.loss_ir), fmt_f64(e.loss_vis)])
        .collect();
    let curve = write_csv(
        &out.join("probe_loss.csv"),
        &["epoch", "loss", "loss_ir", "loss_vis"].map(String::from),
        &rows,
    )?;
    Ok(Report {
        summary: format!(
            "{} samples, {} epochs, final loss {:.6}, artifact {bytes} bytes",
            samples.len(),
            tc.epochs,
            trained.final_loss
        ),
        files: vec![path, curve],
    })
}

pub fn run_surrogate(cfg: &RunConfig, a: &SurrogateArgs) -> Result<Report, CliError> {
    let probe = load_probe(a.probe.as_deref())?;
    let ds = Dataset::scan(cfg.dataset_root()?)?;
    let n_heads = a.heads.or(cfg.file.heads).unwrap_or(DEFAULT_HEADS);
    let tc = a.hyper.resolve(cfg, TrainConfig::default().epochs);
    let env = scene_env(&ds, cfg.env_source, cfg.workers)?;
    let out = cfg.ensure_output()?;
    let pool = pool(cfg.workers)?;
    let scenes = pool.install(|| {
        ds.scenes
            .par_iter()
            .map(|scene| {
                let (ir, vis) = ds.load_sources(scene)?;
                let fused = ds
                    .methods
                    .iter()
                    .map(|m| ds.load_fused(scene, m))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(SurrogateScene::from_fused(scene.clone(), ir, vis, &fused, &probe, env[scene])?)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let trained = pool.install(|| train(&scenes, n_heads, &tc))?;
    let path = out.join("surrogate.bin");
    let bytes = trained.params.save(&path)?;
    let rows: Vec<Vec<String>> = trained
        .curve
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                fmt_f64(e.loss_total),
                fmt_f64(e.loss_ir),
                fmt_f64(e.loss_vis),
                fmt_f64(e.loss_env),
            ]
        })
        .collect();
    let curve = write_csv(
        &out.join("surrogate_loss.csv"),
        &["epoch", "L_total", "L_ir", "L_vis", "L_env"].map(String::from),
        &rows,
    )?;
    let last = trained.curve.last().map(|e| e.loss_total).unwrap_or(f64::NAN);
    Ok(Report {
        summary: format!(
            "{} scenes x {} methods, {n_heads} heads, {} epochs, final loss {last:.6}, artifact {bytes} bytes",
            scenes.len(),
            ds.methods.len(),
            tc.epochs
        ),
        files: vec![path, curve],
    })
}
