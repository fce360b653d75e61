//! Minimal CPU building blocks for the probe and the surrogate: CHW tensors,
//! 3×3 convolutions with zero padding, pooling, a flat parameter store and Adam.
//!
//! Everything is computed in `f64`; serialized artifacts carry `f32`.

pub mod artifact;
mod layers;

pub use layers::{
    avg_pool2, conv3x3, conv3x3_backward, linear, linear_backward, mean_std_pool, mean_std_pool_backward,
    relu_backward_inplace, relu_inplace, sigmoid, Padding,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `channels × height × width` feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Stack along the channel axis.
    pub fn concat(a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!((a.height, a.width), (b.height, b.width));
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Tensor::from_data(a.channels + b.channels, a.height, a.width, data)
    }
}

/// One named tensor inside a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub fan_in: usize,
    pub trainable: bool,
}

/// All parameters of a model in one flat vector, with a layout table.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    specs: Vec<ParamSpec>,
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn builder() -> ParamSetBuilder {
        ParamSetBuilder { specs: Vec::new(), total: 0 }
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> &[f64] {
        let s = &self.specs[idx];
        &self.values[s.offset..s.offset + s.len]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut [f64] {
        let s = &self.specs[idx];
        &mut self.values[s.offset..s.offset + s.len]
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }

    /// Per-element flag, true where the optimizer may update.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.values.len()];
        for s in &self.specs {
            mask[s.offset..s.offset + s.len].fill(s.trainable);
        }
        mask
    }

    /// Uniform `±sqrt(1/fan_in)` for every trainable tensor; others keep their value.
    pub fn init_uniform(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in &self.specs {
            if !s.trainable {
                continue;
            }
            let bound = (1.0 / s.fan_in.max(1) as f64).sqrt();
            for v in &mut self.values[s.offset..s.offset + s.len] {
                *v = rng.random_range(-bound..bound);
            }
        }
    }

    /// Snap every value to the nearest `f32` so serialization round-trips exactly.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub struct ParamSetBuilder {
    specs: Vec<ParamSpec>,
    total: usize,
}

impl ParamSetBuilder {
    pub fn tensor(mut self, name: &str, len: usize, fan_in: usize) -> Self {
        self.push(name, len, fan_in, true);
        self
    }

    /// Stored alongside the weights but never touched by the optimizer.
    pub fn constant(mut self, name: &str, len: usize) -> Self {
        self.push(name, len, 0, false);
        self
    }

    fn push(&mut self, name: &str, len: usize, fan_in: usize, trainable: bool) {
        self.specs.push(ParamSpec {
            name: name.to_string(),
            offset: self.total,
            len,
            fan_in,
            trainable,
        });
        self.total += len;
    }

    pub fn build(self) -> ParamSet {
        ParamSet {
            values: vec![0.0; self.total],
            specs: self.specs,
        }
    }
}

/// Optimizer schedule shared by the probe and the surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted; it leaves parameters untouched.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], mask: &[bool]) {
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            if !mask[i] {
                continue;
            }
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
