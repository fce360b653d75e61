//! Feature mutual information.
//!
//! Both images are mapped to a feature raster (raw pixels, block-DCT
//! magnitudes, or level-1 Haar detail magnitudes). Non-overlapping 8x8 windows
//! of the two rasters are quantized independently with per-window min-max
//! scaling into [`FMI_LEVELS`] levels, and each window contributes the
//! normalized mutual information `2 MI / (H_a + H_b)` of its joint histogram.
//! Windows with `H_a + H_b = 0` are skipped; the score is the mean over the
//! rest.
//!
//! Four levels per image (a 16-cell joint histogram) keeps the plug-in
//! estimator's bias on 64 samples small enough that independent inputs score
//! near zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, GrayImage, Raster};
use crate::metrics::Score;
use crate::transform::{block_dct8, haar_dwt1};

pub const FMI_WINDOW: usize = 8;
pub const FMI_LEVELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FmiFeature {
    Pixel,
    Dct,
    Wavelet,
}

/// Feature raster for `feature`. The DCT map tiles each block's absolute
/// coefficients with the DC term zeroed, so block brightness does not swamp
/// the binning.
pub fn feature_map(img: &GrayImage, feature: FmiFeature) -> Raster {
    match feature {
        FmiFeature::Pixel => img.to_raster(),
        FmiFeature::Dct => block_dct8(img).to_raster(|k, c| if k == 0 { 0.0 } else { c.abs() }),
        FmiFeature::Wavelet => {
            let b = haar_dwt1(img);
            Raster {
                width: b.ll.width,
                height: b.ll.height,
                data: (0..b.ll.data.len())
                    .map(|i| (b.lh.data[i].powi(2) + b.hl.data[i].powi(2) + b.hh.data[i].powi(2)).sqrt())
                    .collect(),
            }
        }
    }
}

pub fn fmi(a: &GrayImage, b: &GrayImage, feature: FmiFeature) -> Result<Score> {
    check_same_dims(a, b)?;
    let fa = feature_map(a, feature);
    let fb = feature_map(b, feature);
    fmi_on_maps(&fa, &fb)
}

pub(crate) fn fmi_on_maps(fa: &Raster, fb: &Raster) -> Result<Score> {
    let nx = fa.width / FMI_WINDOW;
    let ny = fa.height / FMI_WINDOW;
    let mut wa = [0.0; FMI_WINDOW * FMI_WINDOW];
    let mut wb = [0.0; FMI_WINDOW * FMI_WINDOW];
    let (mut total, mut used) = (0.0, 0usize);
    for by in 0..ny {
        for bx in 0..nx {
            for j in 0..FMI_WINDOW {
                let off = (by * FMI_WINDOW + j) * fa.width + bx * FMI_WINDOW;
                wa[j * FMI_WINDOW..(j + 1) * FMI_WINDOW].copy_from_slice(&fa.data[off..off + FMI_WINDOW]);
                wb[j * FMI_WINDOW..(j + 1) * FMI_WINDOW].copy_from_slice(&fb.data[off..off + FMI_WINDOW]);
            }
            if let Some(v) = window_nmi(&wa, &wb) {
                total += v;
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::AllDegenerate);
    }
    Ok(Score::ok(total / used as f64))
}

/// Level index per sample after min-max scaling; a flat window maps to 0.
pub fn quantize(values: &[f64], out: &mut [usize]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for (o, &v) in out.iter_mut().zip(values) {
        *o = if span > 0.0 {
            (((v - lo) / span * FMI_LEVELS as f64) as usize).min(FMI_LEVELS - 1)
        } else {
            0
        };
    }
}

/// Normalized MI of one window pair, `None` when both marginals are flat.
pub fn window_nmi(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let mut qa = [0usize; FMI_WINDOW * FMI_WINDOW];
    let mut qb = [0usize; FMI_WINDOW * FMI_WINDOW];
    quantize(a, &mut qa[..n]);
    quantize(b, &mut qb[..n]);
    let mut joint = [0u32; FMI_LEVELS * FMI_LEVELS];
    let mut ma = [0u32; FMI_LEVELS];
    let mut mb = [0u32; FMI_LEVELS];
    for i in 0..n {
        joint[qa[i] * FMI_LEVELS + qb[i]] += 1;
        ma[qa[i]] += 1;
        mb[qb[i]] += 1;
    }
    let nf = n as f64;
    let ent = |counts: &[u32]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.log2()
            })
            .sum()
    };
    let (ha, hb, hab) = (ent(&ma), ent(&mb), ent(&joint));
    let hsum = ha + hb;
    if hsum == 0.0 {
        return None;
    }
    Some(2.0 * (hsum - hab) / hsum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, w: usize, h: usize) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn self_information_is_one() {
        let x = noise(1, 32, 32);
        for f in [FmiFeature::Pixel, FmiFeature::Dct, FmiFeature::Wavelet] {
            let v = fmi(&x, &x, f).unwrap().value;
            assert!((v - 1.0).abs() < 1e-12, "{f:?} {v}");
        }
    }

    #[test]
    fn independent_noise_is_near_zero() {
        let a = noise(2, 256, 256);
        let b = noise(3, 256, 256);
        let v = fmi(&a, &b, FmiFeature::Pixel).unwrap().value;
        assert!(v <= 0.1, "{v}");
    }

    #[test]
    fn hand_built_joint_histogram() {
        // 4 gray levels, one 8x8 window; b is a relabeling of a on half the pixels
        let a: Vec<f64> = (0..64).map(|i| (i % 4) as f64 / 3.0).collect();
        let b: Vec<f64> = (0..64)
            .map(|i| if i < 32 { (i % 4) as f64 / 3.0 } else { ((i / 2) % 4) as f64 / 3.0 })
            .collect();
        let mut joint = [[0.0f64; 4]; 4];
        for i in 0..64 {
            let qa = (a[i] * 3.0).round() as usize;
            let qb = (b[i] * 3.0).round() as usize;
            joint[qa][qb] += 1.0 / 64.0;
        }
        let h = |p: &[f64]| -> f64 { p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum() };
        let pa: Vec<f64> = (0..4).map(|i| joint[i].iter().sum()).collect();
        let pb: Vec<f64> = (0..4).map(|j| (0..4).map(|i| joint[i][j]).sum()).collect();
        let pj: Vec<f64> = joint.iter().flatten().copied().collect();
        let expect = 2.0 * (h(&pa) + h(&pb) - h(&pj)) / (h(&pa) + h(&pb));
        let got = window_nmi(&a, &b).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn flat_inputs_are_all_degenerate() {
        let c = GrayImage::constant(16, 16, 0.5);
        assert!(matches!(fmi(&c, &c, FmiFeature::Pixel), Err(Error::AllDegenerate)));
    }

    #[test]
    fn symmetric() {
        let (a, b) = (noise(4, 32, 32), noise(5, 32, 32));
        for f in [FmiFeature::Pixel, FmiFeature::Dct, FmiFeature::Wavelet] {
            let ab = fmi(&a, &b, f).unwrap().value;
            let ba = fmi(&b, &a, f).unwrap().value;
            assert!((ab - ba).abs() < 1e-9);
        }
    }
}
