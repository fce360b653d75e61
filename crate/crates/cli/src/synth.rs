use clap::Args;
use fusemetrics::synth::{manifest, write_dataset};

use crate::error::CliError;
use crate::{Report, RunConfig};

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Number of scenes [default: 50]
    #[arg(long)]
    pub scenes: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub width: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub height: Option<usize>,
    /// Write into an output directory that already holds a dataset
    #[arg(long)]
    pub force: bool,
}

pub fn run(cfg: &RunConfig, a: &SynthArgs) -> Result<Report, CliError> {
    let n = a.scenes.or(cfg.file.scenes).unwrap_or(50);
    let w = a.width.or(cfg.file.width).unwrap_or(64);
    let h = a.height.or(cfg.file.height).unwrap_or(64);
    let root = &cfg.output;
    if root.join("ir").exists() && !a.force {
        return Err(CliError::new(
            "Io",
            format!("{} already contains a dataset (use --force to overwrite)", root.display()),
        ));
    }
    cfg.ensure_output()?;
    let summary = write_dataset(root, &manifest(n, w, h, cfg.seed))?;
    Ok(Report {
        summary: format!(
            "{} scenes x {} methods at {w}x{h}, seed {}",
            summary.scenes.len(),
            summary.methods.len(),
            cfg.seed
        ),
        files: vec![root.clone()],
    })
}
