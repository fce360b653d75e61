//! Scene environment weighting and the environment-adjusted score.
//!
//! Raw illumination/obscuration labels are min-max normalized onto `[0, 0.5]`
//! per dataset; their sum is the environment weight `env` in `[0, 1]` that
//! scales the modality-imbalance penalty:
//!
//! `q_star = q_ir + q_vis - env * (q_vis - q_ir)`

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomposition::DecomposedPair;
use crate::error::{Error, Result};
use crate::image::{GrayImage, Plane};
use crate::metrics::{pairwise, FusionTriple, MetricId};
use crate::transform::gradient::sobel_xy;

/// Mean Sobel magnitude treated as fully unobscured by the heuristic.
pub const DEFAULT_GRADIENT_SCALE: f64 = 0.15;
/// Normalized value used for every scene when an attribute has no spread.
pub const DEGENERATE_MIDPOINT: f64 = 0.25;
const NORM_MAX: f64 = 0.5;

/// One entry of the label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawEnvLabel {
    pub scene_id: String,
    pub s_ill: f64,
    pub s_obs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvLabel {
    pub scene_id: String,
    pub s_ill_raw: f64,
    pub s_obs_raw: f64,
    pub s_ill_norm: f64,
    pub s_obs_norm: f64,
    pub env: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedLabels {
    pub labels: Vec<EnvLabel>,
    /// Set when every raw illumination value was equal.
    pub degenerate_ill: bool,
    pub degenerate_obs: bool,
}

impl NormalizedLabels {
    pub fn env_for(&self, scene_id: &str) -> Option<f64> {
        self.labels.iter().find(|l| l.scene_id == scene_id).map(|l| l.env)
    }

    pub fn by_scene(&self) -> BTreeMap<String, f64> {
        self.labels.iter().map(|l| (l.scene_id.clone(), l.env)).collect()
    }
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo) * NORM_MAX).clamp(0.0, NORM_MAX)
    } else {
        DEGENERATE_MIDPOINT
    }
}

/// Min-max normalization of each attribute over the whole set onto `[0, 0.5]`.
pub fn normalize_labels(raw: &[RawEnvLabel]) -> Result<NormalizedLabels> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset("no environment labels".into()));
    }
    if let Some(bad) = raw.iter().find(|r| !r.s_ill.is_finite() || !r.s_obs.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite label for scene {}", bad.scene_id)));
    }
    let (ill_lo, ill_hi) = min_max(raw.iter().map(|r| r.s_ill));
    let (obs_lo, obs_hi) = min_max(raw.iter().map(|r| r.s_obs));
    let labels = raw
        .iter()
        .map(|r| {
            let s_ill_norm = scale(r.s_ill, ill_lo, ill_hi);
            let s_obs_norm = scale(r.s_obs, obs_lo, obs_hi);
            EnvLabel {
                scene_id: r.scene_id.clone(),
                s_ill_raw: r.s_ill,
                s_obs_raw: r.s_obs,
                s_ill_norm,
                s_obs_norm,
                env: s_ill_norm + s_obs_norm,
            }
        })
        .collect();
    Ok(NormalizedLabels {
        labels,
        degenerate_ill: ill_hi <= ill_lo,
        degenerate_obs: obs_hi <= obs_lo,
    })
}

/// Deterministic stand-in for language-model labels: darker scenes score
/// higher illumination difficulty, flatter scenes higher obscuration.
pub fn env_heuristic(vis: &GrayImage) -> (f64, f64) {
    env_heuristic_with(vis, DEFAULT_GRADIENT_SCALE)
}

pub fn env_heuristic_with(vis: &GrayImage, gradient_scale: f64) -> (f64, f64) {
    let s_ill = (1.0 - vis.mean()).clamp(0.0, 1.0);
    let grad = match sobel_xy(vis) {
        Ok((gx, gy)) => {
            gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).sum::<f64>() / gx.data.len() as f64
        }
        // below 3x3 there is no meaningful gradient
        Err(_) => 0.0,
    };
    let s_obs = 1.0 - (grad / gradient_scale).clamp(0.0, 1.0);
    (s_ill, s_obs)
}

pub fn load_labels(path: &Path) -> Result<Vec<RawEnvLabel>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn save_labels(path: &Path, labels: &[RawEnvLabel]) -> Result<()> {
    let text = serde_json::to_string_pretty(labels).expect("labels serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedScore {
    pub metric: MetricId,
    pub q_ir: f64,
    pub q_vis: f64,
    pub delta: f64,
    pub env: f64,
    pub q_star: f64,
}

pub fn adjusted_score(metric: MetricId, q_ir: f64, q_vis: f64, env: f64) -> Result<AdjustedScore> {
    if !(0.0..=1.0).contains(&env) {
        return Err(Error::EnvOutOfRange(env));
    }
    let delta = q_vis - q_ir;
    Ok(AdjustedScore {
        metric,
        q_ir,
        q_vis,
        delta,
        env,
        q_star: q_ir + q_vis - env * delta,
    })
}

/// Classical path: every full-reference metric between each source and its
/// decomposed component (source as reference), combined with `env`.
pub fn adjusted_all(
    triple: &FusionTriple,
    pair: &DecomposedPair,
    env: f64,
) -> Result<BTreeMap<MetricId, AdjustedScore>> {
    if !(0.0..=1.0).contains(&env) {
        return Err(Error::EnvOutOfRange(env));
    }
    let mut out = BTreeMap::new();
    for m in MetricId::FULL_REFERENCE {
        let q_ir = pairwise(m, &triple.ir, &pair.ir_hat)?.value;
        let q_vis = pairwise(m, &triple.vis, &pair.vis_hat)?.value;
        out.insert(m, adjusted_score(m, q_ir, q_vis, env)?);
    }
    Ok(out)
}
