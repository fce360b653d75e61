//! Learned one-pass evaluator.
//!
//! A fixed filter bank ([`features`]) feeds two modality branches and an
//! environment branch. Each modality branch sees the concatenated feature
//! stacks of an anchor (a source image) and a candidate (its decomposed
//! component, or an unrelated scene) and regresses the `N` full-reference
//! metric values the classical kernels would give for that pair. The
//! environment branch regresses the scene weight `env` from the visible image.
//!
//! Feature stacks are 2×2 mean-pooled before the trainable layers. Regression
//! targets are standardized per head; the mean and scale are stored with the
//! parameters so predictions come back in native metric units.

mod features;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{
    features, CH_GABOR, CH_GRAD_MAG, CH_GX, CH_GY, CH_INPUT, CH_LAPLACIAN, CH_LOCAL_MEAN, CH_LOCAL_STD, CH_PYRAMID1,
    FEATURE_CHANNELS, GABOR_SIGMA, GABOR_WAVELENGTH, MIN_FEATURE_SIDE,
};

use crate::decomposition::{decompose, DecomposedPair, ProbeParams};
use crate::environment::{adjusted_score, AdjustedScore};
use crate::error::{Error, Result};
use crate::image::{check_min_dims, check_same_dims, GrayImage, Plane};
use crate::metrics::{pairwise, FusionTriple, MetricId};
use crate::nn::{
    artifact, avg_pool2, conv3x3, conv3x3_backward, linear, linear_backward, mean_std_pool, mean_std_pool_backward,
    relu_backward_inplace, relu_inplace, sigmoid, Adam, Padding, ParamSet, Tensor, TrainConfig,
};
use crate::transform::filter::box_downsample;

pub const SURROGATE_MAGIC: &[u8; 4] = b"EVNT";
pub const BRANCH_WIDTH: usize = 16;
pub const ENV_WIDTH: usize = 8;
pub const DEFAULT_HEADS: usize = 8;
/// Inference box-downsamples by an integer factor so the short side lands in
/// `[ANALYSIS_SIDE, 2 * ANALYSIS_SIDE)`; the 64-pixel training scenes sit inside that band.
pub const ANALYSIS_SIDE: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ir,
    Vis,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::Ir, Modality::Vis];

    fn index(self) -> usize {
        match self {
            Modality::Ir => 0,
            Modality::Vis => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Positive,
    Negative,
}

// tensor indices per modality branch: conv1 w/b, conv2 w/b, fc w/b
const BRANCH: [usize; 2] = [0, 6];
const ENV: usize = 12;
// per modality: target mean, target scale
const STATS: [usize; 2] = [16, 18];

fn layout(n_heads: usize) -> ParamSet {
    let c = BRANCH_WIDTH;
    let cin = 2 * FEATURE_CHANNELS;
    let mut b = ParamSet::builder();
    for m in ["ir", "vis"] {
        b = b
            .tensor(&format!("{m}.conv1.w"), c * cin * 9, cin * 9)
            .tensor(&format!("{m}.conv1.b"), c, cin * 9)
            .tensor(&format!("{m}.conv2.w"), c * c * 9, c * 9)
            .tensor(&format!("{m}.conv2.b"), c, c * 9)
            .tensor(&format!("{m}.fc.w"), n_heads * 2 * c, 2 * c)
            .tensor(&format!("{m}.fc.b"), n_heads, 2 * c);
    }
    let e = ENV_WIDTH;
    b = b
        .tensor("env.conv.w", e * FEATURE_CHANNELS * 9, FEATURE_CHANNELS * 9)
        .tensor("env.conv.b", e, FEATURE_CHANNELS * 9)
        .tensor("env.fc.w", 2 * e, 2 * e)
        .tensor("env.fc.b", 1, 2 * e);
    for m in ["ir", "vis"] {
        b = b.constant(&format!("{m}.target_mean"), n_heads).constant(&format!("{m}.target_scale"), n_heads);
    }
    b.build()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateParams {
    pub params: ParamSet,
    n_heads: usize,
}

struct BranchTrace {
    a1: Tensor,
    a2: Tensor,
    pooled: Vec<f64>,
    z: Vec<f64>,
}

struct EnvTrace {
    a: Tensor,
    pooled: Vec<f64>,
    out: f64,
}

impl SurrogateParams {
    /// Fresh parameters with identity target standardization.
    pub fn init(n_heads: usize, seed: u64) -> Result<Self> {
        if n_heads == 0 || n_heads > MetricId::FULL_REFERENCE.len() {
            return Err(Error::InvalidArgument(format!(
                "head count {n_heads} must be in 1..={}",
                MetricId::FULL_REFERENCE.len()
            )));
        }
        let mut params = layout(n_heads);
        params.init_uniform(seed);
        for m in 0..2 {
            params.get_mut(STATS[m] + 1).fill(1.0);
        }
        params.round_to_f32();
        Ok(SurrogateParams { params, n_heads })
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    /// Metrics predicted by the heads, in head order.
    pub fn metrics(&self) -> &'static [MetricId] {
        &MetricId::FULL_REFERENCE[..self.n_heads]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        artifact::encode(SURROGATE_MAGIC, &self.params)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let lens = artifact::tensor_lengths(SURROGATE_MAGIC, bytes)?;
        let n_heads = *lens
            .get(BRANCH[0] + 5)
            .ok_or_else(|| Error::Artifact("too few tensors for a surrogate".into()))?;
        if n_heads == 0 || n_heads > MetricId::FULL_REFERENCE.len() {
            return Err(Error::Artifact(format!("invalid head count {n_heads}")));
        }
        let mut params = layout(n_heads);
        artifact::decode_into(SURROGATE_MAGIC, bytes, &mut params)?;
        Ok(SurrogateParams { params, n_heads })
    }

    pub fn save(&self, path: &Path) -> Result<usize> {
        artifact::save(path, SURROGATE_MAGIC, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn target_mean(&self, m: Modality) -> &[f64] {
        self.params.get(STATS[m.index()])
    }

    pub fn target_scale(&self, m: Modality) -> &[f64] {
        self.params.get(STATS[m.index()] + 1)
    }

    fn branch_forward(&self, m: Modality, x: &Tensor) -> BranchTrace {
        let i = BRANCH[m.index()];
        let p = &self.params;
        let mut a1 = conv3x3(x, p.get(i), p.get(i + 1), Padding::Zero);
        relu_inplace(&mut a1);
        let mut a2 = conv3x3(&a1, p.get(i + 2), p.get(i + 3), Padding::Zero);
        relu_inplace(&mut a2);
        let pooled = mean_std_pool(&a2);
        let z = linear(&pooled, p.get(i + 4), p.get(i + 5));
        BranchTrace { a1, a2, pooled, z }
    }

    fn env_forward(&self, x: &Tensor) -> EnvTrace {
        let p = &self.params;
        let mut a = conv3x3(x, p.get(ENV), p.get(ENV + 1), Padding::Zero);
        relu_inplace(&mut a);
        let pooled = mean_std_pool(&a);
        let out = sigmoid(linear(&pooled, p.get(ENV + 2), p.get(ENV + 3))[0]);
        EnvTrace { a, pooled, out }
    }

    fn to_native(&self, m: Modality, z: &[f64]) -> Vec<f64> {
        let (mean, scale) = (self.target_mean(m), self.target_scale(m));
        z.iter().zip(mean).zip(scale).map(|((z, mu), s)| mu + s * z).collect()
    }

    fn standardize(&self, m: Modality, targets: &[f64]) -> Vec<f64> {
        let (mean, scale) = (self.target_mean(m), self.target_scale(m));
        targets.iter().zip(mean).zip(scale).map(|((t, mu), s)| (t - mu) / s).collect()
    }

    /// Squared error of one pair (mean over heads, standardized units);
    /// parameter gradients are added to `grad` scaled by `weight`.
    fn pair_loss_grad(&self, m: Modality, x: &Tensor, targets: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        let t = self.branch_forward(m, x);
        let tz = self.standardize(m, targets);
        let n = self.n_heads as f64;
        let mut loss = 0.0;
        let gz: Vec<f64> = t
            .z
            .iter()
            .zip(&tz)
            .map(|(z, y)| {
                loss += (z - y) * (z - y);
                weight * 2.0 * (z - y) / n
            })
            .collect();
        let i = BRANCH[m.index()];
        let specs = self.params.specs();
        let gp = {
            let (gw, gb) = adjacent(grad, &specs[i + 4], &specs[i + 5]);
            linear_backward(&t.pooled, self.params.get(i + 4), &gz, gw, gb)
        };
        let mut g2 = mean_std_pool_backward(&t.a2, &t.pooled, &gp);
        relu_backward_inplace(&mut g2, &t.a2);
        let mut g1 = {
            let (gw, gb) = adjacent(grad, &specs[i + 2], &specs[i + 3]);
            conv3x3_backward(&t.a1, self.params.get(i + 2), &g2, gw, gb, Padding::Zero, true).unwrap()
        };
        relu_backward_inplace(&mut g1, &t.a1);
        let (gw, gb) = adjacent(grad, &specs[i], &specs[i + 1]);
        conv3x3_backward(x, self.params.get(i), &g1, gw, gb, Padding::Zero, false);
        loss / n
    }

    fn env_loss_grad(&self, x: &Tensor, target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let t = self.env_forward(x);
        let d = t.out - target;
        let gy = [weight * 2.0 * d * t.out * (1.0 - t.out)];
        let specs = self.params.specs();
        let gp = {
            let (gw, gb) = adjacent(grad, &specs[ENV + 2], &specs[ENV + 3]);
            linear_backward(&t.pooled, self.params.get(ENV + 2), &gy, gw, gb)
        };
        let mut ga = mean_std_pool_backward(&t.a, &t.pooled, &gp);
        relu_backward_inplace(&mut ga, &t.a);
        let (gw, gb) = adjacent(grad, &specs[ENV], &specs[ENV + 1]);
        conv3x3_backward(x, self.params.get(ENV), &ga, gw, gb, Padding::Zero, false);
        d * d
    }
}

fn adjacent<'a>(
    grad: &'a mut [f64],
    w: &crate::nn::ParamSpec,
    b: &crate::nn::ParamSpec,
) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert_eq!(w.offset + w.len, b.offset);
    grad[w.offset..b.offset + b.len].split_at_mut(w.len)
}

/// Pooled feature stack: the input of every trainable layer.
fn pooled_features(img: &GrayImage) -> Result<Tensor> {
    Ok(avg_pool2(&features(img)?))
}

/// Predicts the `N` metric values of `(anchor, candidate)` with `anchor` as
/// the reference image.
pub fn forward_branch(p: &SurrogateParams, m: Modality, anchor: &GrayImage, candidate: &GrayImage) -> Result<Vec<f64>> {
    check_same_dims(anchor, candidate)?;
    let x = Tensor::concat(&pooled_features(anchor)?, &pooled_features(candidate)?);
    Ok(p.to_native(m, &p.branch_forward(m, &x).z))
}

pub fn forward_env(p: &SurrogateParams, vis: &GrayImage) -> Result<f64> {
    Ok(p.env_forward(&pooled_features(vis)?).out)
}

/// One contrastive regression example.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub modality: Modality,
    pub anchor: GrayImage,
    pub candidate: GrayImage,
    pub targets: Vec<f64>,
    pub kind: PairKind,
}

impl TrainSample {
    /// Targets from the classical kernels on `(anchor, candidate)`.
    pub fn with_oracle(
        modality: Modality,
        anchor: GrayImage,
        candidate: GrayImage,
        kind: PairKind,
        n_heads: usize,
    ) -> Result<Self> {
        check_same_dims(&anchor, &candidate)?;
        let targets = oracle_targets(&anchor, &candidate, n_heads)?;
        Ok(TrainSample {
            modality,
            anchor,
            candidate,
            targets,
            kind,
        })
    }
}

/// Classical values of the first `n_heads` full-reference metrics.
pub fn oracle_targets(reference: &GrayImage, candidate: &GrayImage, n_heads: usize) -> Result<Vec<f64>> {
    MetricId::FULL_REFERENCE[..n_heads].iter().map(|&m| pairwise(m, reference, candidate).map(|s| s.value)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub ir: f64,
    pub vis: f64,
    pub env: f64,
}

struct PreparedPair {
    modality: Modality,
    kind: PairKind,
    x: Tensor,
    targets: Vec<f64>,
}

/// `L_ir + L_vis + L_env`. Each modality term is the mean squared error of its
/// positive pairs plus that of its negative pairs; the environment term is the
/// mean squared error of the sigmoid output. Returns the loss and its gradient
/// with respect to every parameter (zero for the stored constants).
pub fn loss_total(
    p: &SurrogateParams,
    samples: &[TrainSample],
    env: &[(GrayImage, f64)],
) -> Result<(LossParts, Vec<f64>)> {
    if samples.is_empty() && env.is_empty() {
        return Err(Error::EmptyDataset("empty surrogate batch".into()));
    }
    let pairs = samples
        .iter()
        .map(|s| {
            if s.targets.len() != p.n_heads {
                return Err(Error::LengthMismatch(s.targets.len(), p.n_heads));
            }
            check_same_dims(&s.anchor, &s.candidate)?;
            Ok(PreparedPair {
                modality: s.modality,
                kind: s.kind,
                x: Tensor::concat(&pooled_features(&s.anchor)?, &pooled_features(&s.candidate)?),
                targets: s.targets.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let envs = env
        .iter()
        .map(|(img, t)| Ok((pooled_features(img)?, *t)))
        .collect::<Result<Vec<_>>>()?;
    let pair_refs: Vec<&PreparedPair> = pairs.iter().collect();
    let env_refs: Vec<(&Tensor, f64)> = envs.iter().map(|(x, t)| (x, *t)).collect();
    let (parts, grad) = loss_prepared(p, &pair_refs, &env_refs);
    if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss(0));
    }
    Ok((parts, grad))
}

/// On/off state of every ReLU unit for a batch. Central differences are only
/// a valid gradient oracle when a perturbation leaves this unchanged.
pub fn relu_pattern(p: &SurrogateParams, samples: &[TrainSample], env: &[(GrayImage, f64)]) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for s in samples {
        check_same_dims(&s.anchor, &s.candidate)?;
        let x = Tensor::concat(&pooled_features(&s.anchor)?, &pooled_features(&s.candidate)?);
        let t = p.branch_forward(s.modality, &x);
        out.extend(t.a1.data.iter().chain(&t.a2.data).map(|v| *v > 0.0));
    }
    for (img, _) in env {
        out.extend(p.env_forward(&pooled_features(img)?).a.data.iter().map(|v| *v > 0.0));
    }
    Ok(out)
}

fn loss_prepared(p: &SurrogateParams, pairs: &[&PreparedPair], env: &[(&Tensor, f64)]) -> (LossParts, Vec<f64>) {
    let mut counts = [[0usize; 2]; 2];
    for s in pairs {
        counts[s.modality.index()][kind_index(s.kind)] += 1;
    }
    let weight = |s: &PreparedPair| 1.0 / counts[s.modality.index()][kind_index(s.kind)] as f64;
    let env_w = 1.0 / env.len().max(1) as f64;

    enum Job<'a> {
        Pair(&'a PreparedPair),
        Env(&'a Tensor, f64),
    }
    let jobs: Vec<Job> = pairs.iter().map(|s| Job::Pair(s)).chain(env.iter().map(|(x, t)| Job::Env(x, *t))).collect();
    let per_job: Vec<(Vec<f64>, f64)> = jobs
        .par_iter()
        .map(|job| {
            let mut g = p.params.zeros_like();
            let l = match job {
                Job::Pair(s) => {
                    let w = weight(s);
                    w * p.pair_loss_grad(s.modality, &s.x, &s.targets, w, &mut g)
                }
                Job::Env(x, t) => env_w * p.env_loss_grad(x, *t, env_w, &mut g),
            };
            (g, l)
        })
        .collect();

    let mut grad = p.params.zeros_like();
    let mut parts = LossParts::default();
    for (job, (g, l)) in jobs.iter().zip(&per_job) {
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
        match job {
            Job::Pair(s) if s.modality == Modality::Ir => parts.ir += l,
            Job::Pair(_) => parts.vis += l,
            Job::Env(..) => parts.env += l,
        }
    }
    parts.total = parts.ir + parts.vis + parts.env;
    (parts, grad)
}

fn kind_index(k: PairKind) -> usize {
    match k {
        PairKind::Positive => 0,
        PairKind::Negative => 1,
    }
}

/// One training scene: both sources, one or more decomposed component pairs
/// (e.g. from several fusion methods) and the environment label.
#[derive(Clone, Debug)]
pub struct SurrogateScene {
    pub scene_id: String,
    pub ir: GrayImage,
    pub vis: GrayImage,
    pub components: Vec<DecomposedPair>,
    pub env: f64,
}

impl SurrogateScene {
    pub fn new(
        scene_id: impl Into<String>,
        ir: GrayImage,
        vis: GrayImage,
        components: Vec<DecomposedPair>,
        env: f64,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        check_same_dims(&ir, &vis)?;
        check_min_dims(&ir, MIN_FEATURE_SIDE, MIN_FEATURE_SIDE)?;
        if components.is_empty() {
            return Err(Error::EmptyDataset(format!("scene {scene_id} has no components")));
        }
        for c in &components {
            check_same_dims(&ir, &c.ir_hat)?;
            check_same_dims(&ir, &c.vis_hat)?;
        }
        if !(0.0..=1.0).contains(&env) {
            return Err(Error::EnvOutOfRange(env));
        }
        Ok(SurrogateScene {
            scene_id,
            ir,
            vis,
            components,
            env,
        })
    }

    /// Decomposes every fused image with the probe to obtain the components.
    pub fn from_fused(
        scene_id: impl Into<String>,
        ir: GrayImage,
        vis: GrayImage,
        fused: &[GrayImage],
        probe: &ProbeParams,
        env: f64,
    ) -> Result<Self> {
        let components = fused
            .iter()
            .map(|f| {
                check_same_dims(&ir, f)?;
                decompose(f, probe)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(scene_id, ir, vis, components, env)
    }

    pub fn source(&self, m: Modality) -> &GrayImage {
        match m {
            Modality::Ir => &self.ir,
            Modality::Vis => &self.vis,
        }
    }
}

fn component(d: &DecomposedPair, m: Modality) -> &GrayImage {
    match m {
        Modality::Ir => &d.ir_hat,
        Modality::Vis => &d.vis_hat,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEpoch {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_ir: f64,
    pub loss_vis: f64,
    pub loss_env: f64,
}

#[derive(Clone, Debug)]
pub struct SurrogateTraining {
    pub params: SurrogateParams,
    pub curve: Vec<SurrogateEpoch>,
}

struct CachedScene {
    src: [Tensor; 2],
    // oracle targets per component and modality
    pos: Vec<[Vec<f64>; 2]>,
}

fn check_uniform(scenes: &[SurrogateScene]) -> Result<()> {
    let first = &scenes[0].ir;
    scenes.iter().try_for_each(|s| check_same_dims(first, &s.ir))
}

/// Draws an unrelated scene for every scene and evaluates the negative targets.
fn draw_negatives(
    scenes: &[SurrogateScene],
    n_heads: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<[Vec<f64>; 2]>)> {
    let n = scenes.len();
    let partner: Vec<usize> = (0..n)
        .map(|u| {
            let v = rng.random_range(0..n - 1);
            if v >= u {
                v + 1
            } else {
                v
            }
        })
        .collect();
    let targets = partner
        .par_iter()
        .enumerate()
        .map(|(u, &v)| {
            Ok([
                oracle_targets(&scenes[u].ir, &scenes[v].ir, n_heads)?,
                oracle_targets(&scenes[u].vis, &scenes[v].vis, n_heads)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((partner, targets))
}

fn fit_stats(rows: impl Iterator<Item = Vec<f64>>, n_heads: usize) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = rows.collect();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..n_heads).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let scale = (0..n_heads)
        .map(|k| {
            let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
            // a head whose target never varies keeps unit scale
            if var.sqrt() > 1e-9 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Contrastive training on `scenes` (all of one size). Positives pair each
/// source with one of its decomposed components, drawn every epoch; negatives pair it with the same
/// modality of a uniformly drawn other scene, redrawn every epoch. Target
/// standardization is fitted once on the positives and the first draw of
/// negatives. Deterministic for a given seed; returned parameters are rounded
/// to `f32`.
pub fn train(scenes: &[SurrogateScene], n_heads: usize, cfg: &TrainConfig) -> Result<SurrogateTraining> {
    train_observed(scenes, n_heads, cfg, |_, _| {})
}

/// [`train`] with a callback after every epoch, receiving the epoch's mean
/// losses and the current (unrounded) parameters.
pub fn train_observed(
    scenes: &[SurrogateScene],
    n_heads: usize,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&SurrogateEpoch, &SurrogateParams),
) -> Result<SurrogateTraining> {
    cfg.validate()?;
    if scenes.len() < 2 {
        return Err(Error::EmptyDataset(format!(
            "surrogate training needs at least 2 scenes, got {}",
            scenes.len()
        )));
    }
    check_uniform(scenes)?;
    let mut p = SurrogateParams::init(n_heads, cfg.seed)?;

    let cache = scenes
        .par_iter()
        .map(|s| {
            let pos = s
                .components
                .iter()
                .map(|c| Ok([oracle_targets(&s.ir, &c.ir_hat, n_heads)?, oracle_targets(&s.vis, &c.vis_hat, n_heads)?]))
                .collect::<Result<Vec<_>>>()?;
            Ok(CachedScene {
                src: [pooled_features(&s.ir)?, pooled_features(&s.vis)?],
                pos,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0e7a_11ce);
    let mut negatives = draw_negatives(scenes, n_heads, &mut rng)?;
    for m in Modality::BOTH {
        let k = m.index();
        let rows = cache.iter().flat_map(|c| c.pos.iter().map(|t| t[k].clone())).chain(negatives.1.iter().map(|t| t[k].clone()));
        let (mean, scale) = fit_stats(rows, n_heads);
        p.params.get_mut(STATS[k]).copy_from_slice(&mean);
        p.params.get_mut(STATS[k] + 1).copy_from_slice(&scale);
    }
    p.params.round_to_f32();

    let mask = p.params.trainable_mask();
    let mut opt = Adam::new(p.params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            negatives = draw_negatives(scenes, n_heads, &mut rng)?;
        }
        let (partner, neg_targets) = &negatives;
        let chosen: Vec<usize> = scenes.iter().map(|s| rng.random_range(0..s.components.len())).collect();
        order.shuffle(&mut rng);
        let mut sums = LossParts::default();
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let comp_features = batch
                .par_iter()
                .map(|&u| {
                    let d = &scenes[u].components[chosen[u]];
                    Ok([pooled_features(&d.ir_hat)?, pooled_features(&d.vis_hat)?])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut pairs = Vec::with_capacity(4 * batch.len());
            for (&u, comp) in batch.iter().zip(&comp_features) {
                for m in Modality::BOTH {
                    let k = m.index();
                    let c = &cache[u];
                    pairs.push(PreparedPair {
                        modality: m,
                        kind: PairKind::Positive,
                        x: Tensor::concat(&c.src[k], &comp[k]),
                        targets: c.pos[chosen[u]][k].clone(),
                    });
                    pairs.push(PreparedPair {
                        modality: m,
                        kind: PairKind::Negative,
                        x: Tensor::concat(&c.src[k], &cache[partner[u]].src[k]),
                        targets: neg_targets[u][k].clone(),
                    });
                }
            }
            let refs: Vec<&PreparedPair> = pairs.iter().collect();
            let env: Vec<(&Tensor, f64)> = batch.iter().map(|&u| (&cache[u].src[1], scenes[u].env)).collect();
            let (parts, grad) = loss_prepared(&p, &refs, &env);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss(step));
            }
            opt.step(&mut p.params.values, &grad, &mask);
            step += 1;
            batches += 1;
            sums.total += parts.total;
            sums.ir += parts.ir;
            sums.vis += parts.vis;
            sums.env += parts.env;
        }
        let nb = batches as f64;
        let record = SurrogateEpoch {
            epoch,
            loss_total: sums.total / nb,
            loss_ir: sums.ir / nb,
            loss_vis: sums.vis / nb,
            loss_env: sums.env / nb,
        };
        on_epoch(&record, &p);
        curve.push(record);
    }
    p.params.round_to_f32();
    if !p.params.all_finite() {
        return Err(Error::NonFiniteLoss(step));
    }
    Ok(SurrogateTraining { params: p, curve })
}

/// Mean squared error (standardized units, averaged over heads, both
/// modalities and every component) of the positive-pair predictions against
/// the oracle.
pub fn positive_mse(p: &SurrogateParams, scenes: &[SurrogateScene]) -> Result<f64> {
    if scenes.is_empty() {
        return Err(Error::EmptyDataset("no scenes".into()));
    }
    let per_scene = scenes
        .par_iter()
        .map(|s| {
            let mut acc = 0.0;
            for d in &s.components {
                for m in Modality::BOTH {
                    let pred = forward_branch(p, m, s.source(m), component(d, m))?;
                    let oracle = oracle_targets(s.source(m), component(d, m), p.n_heads)?;
                    let (a, b) = (p.standardize(m, &pred), p.standardize(m, &oracle));
                    acc += a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / p.n_heads as f64;
                }
            }
            Ok(acc / (2 * s.components.len()) as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_scene.iter().sum::<f64>() / scenes.len() as f64)
}

/// Surrogate outputs for one fused image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePrediction {
    pub q_ir: Vec<f64>,
    pub q_vis: Vec<f64>,
    pub env: f64,
}

/// Box-downsampling factor used at inference for an image of this size.
pub fn analysis_factor(width: usize, height: usize) -> usize {
    (width.min(height) / ANALYSIS_SIDE).max(1)
}

/// Decompose, run both branches against the sources and the environment
/// branch on the visible image, all at analysis resolution.
pub fn predict(triple: &FusionTriple, probe: &ProbeParams, p: &SurrogateParams) -> Result<SurrogatePrediction> {
    let k = analysis_factor(triple.fused.width(), triple.fused.height());
    let (ir, vis, fused) = (
        box_downsample(&triple.ir, k),
        box_downsample(&triple.vis, k),
        box_downsample(&triple.fused, k),
    );
    let d = decompose(&fused, probe)?;
    let f_ir = pooled_features(&ir)?;
    let f_vis = pooled_features(&vis)?;
    let z_ir = p.branch_forward(Modality::Ir, &Tensor::concat(&f_ir, &pooled_features(&d.ir_hat)?)).z;
    let z_vis = p.branch_forward(Modality::Vis, &Tensor::concat(&f_vis, &pooled_features(&d.vis_hat)?)).z;
    Ok(SurrogatePrediction {
        q_ir: p.to_native(Modality::Ir, &z_ir),
        q_vis: p.to_native(Modality::Vis, &z_vis),
        env: p.env_forward(&f_vis).out,
    })
}

/// Environment-adjusted score of every predicted metric.
pub fn predict_adjusted(
    triple: &FusionTriple,
    probe: &ProbeParams,
    p: &SurrogateParams,
) -> Result<BTreeMap<MetricId, AdjustedScore>> {
    let pred = predict(triple, probe, p)?;
    compose_adjusted(p.metrics(), &pred)
}

pub fn compose_adjusted(metrics: &[MetricId], pred: &SurrogatePrediction) -> Result<BTreeMap<MetricId, AdjustedScore>> {
    metrics
        .iter()
        .enumerate()
        .map(|(k, &m)| Ok((m, adjusted_score(m, pred.q_ir[k], pred.q_vis[k], pred.env)?)))
        .collect()
}
