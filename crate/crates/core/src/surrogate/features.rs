//! Fixed analytic filter bank feeding the surrogate branches.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::Result;
use crate::image::{check_min_dims, GrayImage, Plane};
use crate::nn::Tensor;
use crate::transform::filter::upsample_nearest;
use crate::transform::gradient::sobel_xy;
use crate::transform::pyramid::reduce;

pub const FEATURE_CHANNELS: usize = 12;
pub const MIN_FEATURE_SIDE: usize = 16;

pub const CH_INPUT: usize = 0;
pub const CH_PYRAMID1: usize = 1;
pub const CH_GX: usize = 2;
pub const CH_GY: usize = 3;
pub const CH_GRAD_MAG: usize = 4;
pub const CH_LAPLACIAN: usize = 5;
/// First of four Gabor channels at 0°, 45°, 90°, 135°.
pub const CH_GABOR: usize = 6;
pub const CH_LOCAL_MEAN: usize = 10;
pub const CH_LOCAL_STD: usize = 11;

pub const GABOR_WAVELENGTH: f64 = 4.0;
pub const GABOR_SIGMA: f64 = 2.0;
const GABOR_HALF: isize = 3;
const LOCAL_HALF: isize = 2;

struct GaborPair {
    even: Vec<f64>,
    odd: Vec<f64>,
}

/// Tap-major interleaving of the bank: `[tap][even0, odd0, even1, ..., odd3]`,
/// so one pass over the patch feeds eight independent accumulators.
fn gabor_taps() -> &'static [[f64; 8]] {
    static TAPS: OnceLock<Vec<[f64; 8]>> = OnceLock::new();
    TAPS.get_or_init(|| {
        let bank: [GaborPair; 4] = std::array::from_fn(|k| gabor_pair(k as f64 * PI / 4.0));
        (0..bank[0].even.len())
            .map(|t| std::array::from_fn(|j| if j % 2 == 0 { bank[j / 2].even[t] } else { bank[j / 2].odd[t] }))
            .collect()
    })
}

/// Quadrature pair; the even part is made zero-mean and both are scaled so a
/// unit-amplitude sinusoid at the matched frequency responds with about 1.
fn gabor_pair(theta: f64) -> GaborPair {
    let side = (2 * GABOR_HALF + 1) as usize;
    let (mut even, mut odd, mut env) = (Vec::new(), Vec::new(), Vec::new());
    for dy in -GABOR_HALF..=GABOR_HALF {
        for dx in -GABOR_HALF..=GABOR_HALF {
            let (x, y) = (dx as f64, dy as f64);
            let u = x * theta.cos() + y * theta.sin();
            let g = (-(x * x + y * y) / (2.0 * GABOR_SIGMA * GABOR_SIGMA)).exp();
            let phase = 2.0 * PI * u / GABOR_WAVELENGTH;
            env.push(g);
            even.push(g * phase.cos());
            odd.push(g * phase.sin());
        }
    }
    let env_sum: f64 = env.iter().sum();
    let dc = even.iter().sum::<f64>() / env_sum;
    for (e, g) in even.iter_mut().zip(&env) {
        *e -= dc * g;
    }
    let norm = 2.0 / env_sum;
    even.iter_mut().chain(odd.iter_mut()).for_each(|v| *v *= norm);
    debug_assert_eq!(even.len(), side * side);
    GaborPair { even, odd }
}

/// Row-major copy with `r` replicated pixels on every side; returns the
/// buffer and its row stride.
fn replicate_padded(img: &GrayImage, r: usize) -> (Vec<f64>, usize) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let pw = img.width() + 2 * r;
    let r = r as isize;
    let mut out = Vec::with_capacity(pw * (img.height() + 2 * r as usize));
    for y in -r..h + r {
        for x in -r..w + r {
            out.push(img.at_clamped(x, y));
        }
    }
    (out, pw)
}

/// The twelve-channel feature stack of an image, same spatial size as the
/// input. Borders are handled by edge replication.
pub fn features(img: &GrayImage) -> Result<Tensor> {
    check_min_dims(img, MIN_FEATURE_SIDE, MIN_FEATURE_SIDE)?;
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let mut out = Tensor::zeros(FEATURE_CHANNELS, h, w);

    out.channel_mut(CH_INPUT).copy_from_slice(img.data());
    let coarse = upsample_nearest(&reduce(img), w, h);
    out.channel_mut(CH_PYRAMID1).copy_from_slice(&coarse.data);

    // Sobel responses lie in [-4, 4] for [0, 1] input; scale to about unit range
    let (gx, gy) = sobel_xy(img)?;
    for i in 0..n {
        let (a, b) = (gx.data[i] / 4.0, gy.data[i] / 4.0);
        out.data[CH_GX * n + i] = a;
        out.data[CH_GY * n + i] = b;
        out.data[CH_GRAD_MAG * n + i] = (a * a + b * b).sqrt();
    }

    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = img.at_clamped(x, y);
            let lap = img.at_clamped(x - 1, y) + img.at_clamped(x + 1, y) + img.at_clamped(x, y - 1)
                + img.at_clamped(x, y + 1)
                - 4.0 * c;
            out.data[CH_LAPLACIAN * n + y as usize * w + x as usize] = lap / 4.0;
        }
    }

    let side = (2 * GABOR_HALF + 1) as usize;
    let (pad, pw) = replicate_padded(img, GABOR_HALF as usize);
    let mut patch = vec![0.0; side * side];
    let taps = gabor_taps();
    for y in 0..h {
        for x in 0..w {
            for (r, dst) in patch.chunks_exact_mut(side).enumerate() {
                let start = (y + r) * pw + x;
                dst.copy_from_slice(&pad[start..start + side]);
            }
            let i = y * w + x;
            let mut acc = [0.0f64; 8];
            for (tap, &v) in taps.iter().zip(&patch) {
                for j in 0..8 {
                    acc[j] += tap[j] * v;
                }
            }
            for o in 0..4 {
                out.data[(CH_GABOR + o) * n + i] = (acc[2 * o] * acc[2 * o] + acc[2 * o + 1] * acc[2 * o + 1]).sqrt();
            }
        }
    }

    let count = ((2 * LOCAL_HALF + 1) * (2 * LOCAL_HALF + 1)) as f64;
    let span = (2 * LOCAL_HALF + 1) as usize;
    let (pad, pw) = replicate_padded(img, LOCAL_HALF as usize);
    for y in 0..h {
        for x in 0..w {
            let (mut s, mut s2) = (0.0, 0.0);
            for r in 0..span {
                for &v in &pad[(y + r) * pw + x..(y + r) * pw + x + span] {
                    s += v;
                    s2 += v * v;
                }
            }
            let mu = s / count;
            let i = y * w + x;
            out.data[CH_LOCAL_MEAN * n + i] = mu;
            out.data[CH_LOCAL_STD * n + i] = (s2 / count - mu * mu).max(0.0).sqrt();
        }
    }
    Ok(out)
}
