//! Information probe: splits a fused image back into an infrared-like and a
//! visible-like component.
//!
//! The network is a three-layer 3×3 convolutional encoder (1→8→8→8, ReLU)
//! feeding two heads (8→8 ReLU, 8→1 sigmoid), with edge-replicated borders
//! so flat inputs decode to flat outputs. Components may also be read
//! from disk when they were produced by an external probe.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_min_dims, check_same_dims, GrayImage, Plane};
use crate::io::{load_gray, save_pgm};
use crate::nn::{
    artifact, conv3x3, conv3x3_backward, relu_backward_inplace, relu_inplace, sigmoid, Adam, Padding, ParamSet,
    Tensor, TrainConfig,
};

pub const PROBE_MAGIC: &[u8; 4] = b"IPRB";
pub const PROBE_WIDTH: usize = 8;
pub const MIN_PROBE_TRIPLES: usize = 50;
/// Share of training samples re-exposed by a random global gain each epoch.
pub const GAIN_AUGMENT_PROB: f64 = 0.5;
/// Largest exposure reduction of the gain augmentation, in stops.
pub const GAIN_AUGMENT_STOPS: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedPair {
    pub ir_hat: GrayImage,
    pub vis_hat: GrayImage,
}

// parameter tensor indices, weight followed by bias
const ENC: [usize; 3] = [0, 2, 4];
const IR_HEAD: [usize; 2] = [6, 8];
const VIS_HEAD: [usize; 2] = [10, 12];

fn layout() -> ParamSet {
    let c = PROBE_WIDTH;
    let mut b = ParamSet::builder();
    for (name, cin, cout) in [("enc1", 1, c), ("enc2", c, c), ("enc3", c, c)] {
        b = b.tensor(&format!("{name}.w"), cout * cin * 9, cin * 9).tensor(&format!("{name}.b"), cout, cin * 9);
    }
    for head in ["ir", "vis"] {
        b = b
            .tensor(&format!("{head}1.w"), c * c * 9, c * 9)
            .tensor(&format!("{head}1.b"), c, c * 9)
            .tensor(&format!("{head}2.w"), c * 9, c * 9)
            .tensor(&format!("{head}2.b"), 1, c * 9);
    }
    b.build()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeParams {
    pub params: ParamSet,
}

struct Trace {
    input: Tensor,
    enc: [Tensor; 3],
    hidden: [Tensor; 2],
    out: [Tensor; 2],
}

impl ProbeParams {
    pub fn init(seed: u64) -> Self {
        let mut params = layout();
        params.init_uniform(seed);
        params.round_to_f32();
        ProbeParams { params }
    }

    pub fn serialized_size(&self) -> usize {
        artifact::encode(PROBE_MAGIC, &self.params).len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        artifact::encode(PROBE_MAGIC, &self.params)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut params = layout();
        artifact::decode_into(PROBE_MAGIC, bytes, &mut params)?;
        Ok(ProbeParams { params })
    }

    pub fn save(&self, path: &Path) -> Result<usize> {
        artifact::save(path, PROBE_MAGIC, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut params = layout();
        artifact::load_into(path, PROBE_MAGIC, &mut params)?;
        Ok(ProbeParams { params })
    }

    fn conv(&self, x: &Tensor, w_idx: usize) -> Tensor {
        conv3x3(x, self.params.get(w_idx), self.params.get(w_idx + 1), Padding::Replicate)
    }

    fn forward(&self, fused: &GrayImage) -> Trace {
        let input = Tensor::from_data(1, fused.height(), fused.width(), fused.data().to_vec());
        let mut a1 = self.conv(&input, ENC[0]);
        relu_inplace(&mut a1);
        let mut a2 = self.conv(&a1, ENC[1]);
        relu_inplace(&mut a2);
        let mut a3 = self.conv(&a2, ENC[2]);
        relu_inplace(&mut a3);
        let head = |idx: [usize; 2]| {
            let mut h = self.conv(&a3, idx[0]);
            relu_inplace(&mut h);
            let mut z = self.conv(&h, idx[1]);
            z.data.iter_mut().for_each(|v| *v = sigmoid(*v));
            (h, z)
        };
        let (h_ir, o_ir) = head(IR_HEAD);
        let (h_vis, o_vis) = head(VIS_HEAD);
        Trace {
            input,
            enc: [a1, a2, a3],
            hidden: [h_ir, h_vis],
            out: [o_ir, o_vis],
        }
    }

    /// Squared-error loss of one sample (mean over pixels, summed over the two
    /// heads); gradients are added to `grad` scaled by `weight`.
    #[cfg(test)]
    fn loss_and_grad(&self, s: &ProbeSample, weight: f64, grad: &mut [f64]) -> (f64, f64) {
        self.loss_and_grad_scaled(s, 1.0, weight, grad)
    }

    /// Same, on the sample with all three images multiplied by `gain`.
    fn loss_and_grad_scaled(&self, s: &ProbeSample, gain: f64, weight: f64, grad: &mut [f64]) -> (f64, f64) {
        if gain != 1.0 {
            let scaled = ProbeSample {
                ir: s.ir.map(|v| v * gain),
                vis: s.vis.map(|v| v * gain),
                fused: s.fused.map(|v| v * gain),
            };
            return self.loss_and_grad_scaled(&scaled, 1.0, weight, grad);
        }
        let t = self.forward(&s.fused);
        let n = s.fused.len() as f64;
        let mut parts = [0.0; 2];
        let mut g_a3 = Tensor::zeros(PROBE_WIDTH, t.input.height, t.input.width);
        for (k, (target, idx)) in [(&s.ir, IR_HEAD), (&s.vis, VIS_HEAD)].into_iter().enumerate() {
            let out = &t.out[k];
            let mut g = Tensor::zeros(1, out.height, out.width);
            for ((gv, o), y) in g.data.iter_mut().zip(&out.data).zip(target.data()) {
                let d = o - y;
                parts[k] += d * d;
                *gv = weight * 2.0 * d / n * o * (1.0 - o);
            }
            parts[k] /= n;
            let mut gh = self.backward_conv(&t.hidden[k], idx[1], &g, grad, true).unwrap();
            relu_backward_inplace(&mut gh, &t.hidden[k]);
            let ga = self.backward_conv(&t.enc[2], idx[0], &gh, grad, true).unwrap();
            for (a, b) in g_a3.data.iter_mut().zip(&ga.data) {
                *a += b;
            }
        }
        relu_backward_inplace(&mut g_a3, &t.enc[2]);
        let mut g2 = self.backward_conv(&t.enc[1], ENC[2], &g_a3, grad, true).unwrap();
        relu_backward_inplace(&mut g2, &t.enc[1]);
        let mut g1 = self.backward_conv(&t.enc[0], ENC[1], &g2, grad, true).unwrap();
        relu_backward_inplace(&mut g1, &t.enc[0]);
        self.backward_conv(&t.input, ENC[0], &g1, grad, false);
        (parts[0], parts[1])
    }

    fn backward_conv(&self, input: &Tensor, w_idx: usize, g: &Tensor, grad: &mut [f64], want: bool) -> Option<Tensor> {
        let specs = self.params.specs();
        let (sw, sb) = (&specs[w_idx], &specs[w_idx + 1]);
        // weight and bias tensors are adjacent in the layout
        let (gw, rest) = grad[sw.offset..sb.offset + sb.len].split_at_mut(sw.len);
        conv3x3_backward(input, self.params.get(w_idx), g, gw, rest, Padding::Replicate, want)
    }
}

/// Runs the probe on a fused image.
pub fn decompose(fused: &GrayImage, p: &ProbeParams) -> Result<DecomposedPair> {
    check_min_dims(fused, 8, 8)?;
    let t = p.forward(fused);
    let (w, h) = (fused.width(), fused.height());
    let [o_ir, o_vis] = t.out;
    Ok(DecomposedPair {
        ir_hat: GrayImage::from_vec_unchecked(w, h, o_ir.data),
        vis_hat: GrayImage::from_vec_unchecked(w, h, o_vis.data),
    })
}

/// One reconstruction example: the fused image and the two sources it came from.
#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub ir: GrayImage,
    pub vis: GrayImage,
    pub fused: GrayImage,
}

impl ProbeSample {
    pub fn new(ir: GrayImage, vis: GrayImage, fused: GrayImage) -> Result<Self> {
        check_same_dims(&ir, &fused)?;
        check_same_dims(&vis, &fused)?;
        check_min_dims(&fused, 8, 8)?;
        Ok(ProbeSample { ir, vis, fused })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub loss_ir: f64,
    pub loss_vis: f64,
}

#[derive(Clone, Debug)]
pub struct ProbeTraining {
    pub params: ProbeParams,
    pub curve: Vec<ProbeEpoch>,
    pub final_loss: f64,
}

/// Mean reconstruction loss (`mse_ir + mse_vis`) over a set of samples.
pub fn reconstruction_loss(p: &ProbeParams, samples: &[ProbeSample]) -> f64 {
    let total: f64 = samples
        .par_iter()
        .map(|s| {
            let d = decompose(&s.fused, p).expect("validated sample");
            mse(&d.ir_hat, &s.ir) + mse(&d.vis_hat, &s.vis)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / samples.len() as f64
}

fn mse(a: &GrayImage, b: &GrayImage) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Minibatch Adam on the reconstruction loss. Deterministic for a given seed;
/// the returned parameters are rounded to `f32` so they survive serialization.
///
/// Each epoch a random half of the samples is darkened by a global gain
/// `2^-k`, `k ~ U(0, 10)`. Average, max and Laplacian blending commute with a
/// global gain, so the darkened triples are valid examples of the same
/// operators and teach the probe that dark fused input means dark sources.
pub fn train_probe(samples: &[ProbeSample], cfg: &TrainConfig) -> Result<ProbeTraining> {
    train_probe_from(ProbeParams::init(cfg.seed), samples, cfg)
}

pub fn train_probe_from(init: ProbeParams, samples: &[ProbeSample], cfg: &TrainConfig) -> Result<ProbeTraining> {
    cfg.validate()?;
    if samples.len() < MIN_PROBE_TRIPLES {
        return Err(Error::EmptyDataset(format!(
            "probe training needs at least {MIN_PROBE_TRIPLES} triples, got {}",
            samples.len()
        )));
    }
    let mut p = init;
    let mask = p.params.trainable_mask();
    let mut opt = Adam::new(p.params.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_9b0b);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let gains: Vec<f64> = (0..samples.len())
            .map(|_| {
                let (flip, u): (f64, f64) = (rng.random(), rng.random());
                if flip < GAIN_AUGMENT_PROB {
                    (-u * GAIN_AUGMENT_STOPS).exp2()
                } else {
                    1.0
                }
            })
            .collect();
        let (mut sum_ir, mut sum_vis) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let weight = 1.0 / batch.len() as f64;
            let per_sample: Vec<(Vec<f64>, f64, f64)> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = p.params.zeros_like();
                    let (li, lv) = p.loss_and_grad_scaled(&samples[i], gains[i], weight, &mut g);
                    (g, li, lv)
                })
                .collect();
            let mut grad = p.params.zeros_like();
            for (g, li, lv) in &per_sample {
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
                sum_ir += li;
                sum_vis += lv;
            }
            let batch_loss: f64 = per_sample.iter().map(|(_, a, b)| a + b).sum::<f64>() * weight;
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss(step));
            }
            opt.step(&mut p.params.values, &grad, &mask);
            step += 1;
        }
        let n = samples.len() as f64;
        curve.push(ProbeEpoch {
            epoch,
            loss: (sum_ir + sum_vis) / n,
            loss_ir: sum_ir / n,
            loss_vis: sum_vis / n,
        });
    }
    p.params.round_to_f32();
    if !p.params.all_finite() {
        return Err(Error::NonFiniteLoss(step));
    }
    let final_loss = reconstruction_loss(&p, samples);
    Ok(ProbeTraining {
        params: p,
        curve,
        final_loss,
    })
}

fn component_paths(dir: &Path, scene_id: &str, method_id: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{scene_id}_{method_id}_ir.pgm")),
        dir.join(format!("{scene_id}_{method_id}_vis.pgm")),
    )
}

pub fn save_components(dir: &Path, scene_id: &str, method_id: &str, pair: &DecomposedPair) -> Result<()> {
    let (ir, vis) = component_paths(dir, scene_id, method_id);
    save_pgm(&pair.ir_hat, ir)?;
    save_pgm(&pair.vis_hat, vis)
}

/// Reads externally produced components `<scene>_<method>_{ir,vis}.pgm` and
/// checks them against the fused image they belong to.
pub fn load_components(dir: &Path, scene_id: &str, method_id: &str, fused: &GrayImage) -> Result<DecomposedPair> {
    let (ir, vis) = component_paths(dir, scene_id, method_id);
    let ir_hat = load_gray(ir)?;
    let vis_hat = load_gray(vis)?;
    check_same_dims(&ir_hat, fused)?;
    check_same_dims(&vis_hat, fused)?;
    Ok(DecomposedPair { ir_hat, vis_hat })
}
