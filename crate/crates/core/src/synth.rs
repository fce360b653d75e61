//! Deterministic synthetic infrared/visible scenes and a family of pseudo
//! fusion methods with a known quality ordering.
//!
//! Every random draw comes from a ChaCha8 stream seeded by the scene seed, so
//! a [`SceneSpec`] always regenerates the same bytes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::environment::{env_heuristic, save_labels, RawEnvLabel};
use crate::error::{Error, Result};
use crate::image::{check_min_dims, check_same_dims, GrayImage, Plane};
use crate::io::save_pgm;
use crate::transform::filter::{gaussian_kernel, separable_same, BINOMIAL5};

pub const MIN_SCENE_SIDE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Day,
    Night,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub regime: Regime,
    /// Number of warm blobs.
    pub n_targets: usize,
    /// Multiplies the cell sizes of the visible texture.
    pub texture_scale: f64,
}

impl SceneSpec {
    pub fn new(seed: u64, width: usize, height: usize, regime: Regime) -> Self {
        SceneSpec {
            seed,
            width,
            height,
            regime,
            n_targets: 3,
            texture_scale: 1.0,
        }
    }
}

/// `n` specs derived from one seed: alternating day/night, varied target
/// counts and texture scales.
pub fn manifest(n: usize, width: usize, height: usize, seed: u64) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| SceneSpec {
            seed: rng.random(),
            width,
            height,
            regime: if i % 2 == 0 { Regime::Day } else { Regime::Night },
            n_targets: rng.random_range(1..=4),
            texture_scale: rng.random_range(0.5..2.0),
        })
        .collect()
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:03}")
}

/// Bilinear value noise in `[0, 1]` on a lattice of `cell`-pixel spacing.
fn value_noise(rng: &mut ChaCha8Rng, w: usize, h: usize, cell: f64) -> Vec<f64> {
    let cell = cell.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 2;
    let gh = (h as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let fy = y as f64 / cell;
        let (iy, ty) = (fy.floor() as usize, smooth(fy.fract()));
        for x in 0..w {
            let fx = x as f64 / cell;
            let (ix, tx) = (fx.floor() as usize, smooth(fx.fract()));
            let g = |dx: usize, dy: usize| lattice[(iy + dy) * gw + ix + dx];
            let top = g(0, 0) * (1.0 - tx) + g(1, 0) * tx;
            let bot = g(0, 1) * (1.0 - tx) + g(1, 1) * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

struct Target {
    cx: f64,
    cy: f64,
    sigma: f64,
    amp: f64,
    vis_value: f64,
}

/// Pseudo-IR and visible images of one scene.
pub fn gen_pair(spec: &SceneSpec) -> Result<(GrayImage, GrayImage)> {
    render(spec).map(|(ir, vis, _)| (ir, vis))
}

/// Also returns the warm-target centres.
fn render(spec: &SceneSpec) -> Result<(GrayImage, GrayImage, Vec<(f64, f64)>)> {
    let (w, h) = (spec.width, spec.height);
    if w < MIN_SCENE_SIDE || h < MIN_SCENE_SIDE {
        return Err(Error::too_small(w, h, MIN_SCENE_SIDE, MIN_SCENE_SIDE));
    }
    if !(spec.texture_scale > 0.0 && spec.texture_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("texture_scale {} must be > 0", spec.texture_scale)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let side = w.min(h) as f64;
    let targets: Vec<Target> = (0..spec.n_targets)
        .map(|_| Target {
            cx: rng.random_range(0.1..0.9) * w as f64,
            cy: rng.random_range(0.1..0.9) * h as f64,
            sigma: rng.random_range(0.03..0.08) * side,
            amp: rng.random_range(0.85..1.0),
            vis_value: rng.random_range(0.1..0.9),
        })
        .collect();

    let bg = value_noise(&mut rng, w, h, w.max(h) as f64 / 3.0);
    let sensor = Normal::new(0.0, 0.01).expect("valid sigma");
    let mut ir = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut v = 0.02 + 0.25 * bg[y * w + x].powf(1.5) + 0.05 * y as f64 / h as f64;
            for t in &targets {
                let d2 = (x as f64 - t.cx).powi(2) + (y as f64 - t.cy).powi(2);
                v += t.amp * (-d2 / (2.0 * t.sigma * t.sigma)).exp();
            }
            ir.push(v + sensor.sample(&mut rng));
        }
    }

    let octaves = [(16.0, 0.5), (8.0, 0.3), (4.0, 0.2)];
    let mut tex = vec![0.0; w * h];
    for (cell, amp) in octaves {
        let layer = value_noise(&mut rng, w, h, cell * spec.texture_scale);
        for (t, l) in tex.iter_mut().zip(layer) {
            *t += amp * l;
        }
    }
    let mut vis = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let ramp = 0.5 * (x as f64 / w as f64 + y as f64 / h as f64);
            let mut v = 0.2 + 0.45 * tex[y * w + x] + 0.25 * ramp;
            for t in &targets {
                let d2 = (x as f64 - t.cx).powi(2) + (y as f64 - t.cy).powi(2);
                if d2 <= (1.5 * t.sigma).powi(2) {
                    v = t.vis_value;
                }
            }
            vis.push(v);
        }
    }
    if spec.regime == Regime::Night {
        let dark = Normal::new(0.0, 0.03).expect("valid sigma");
        for v in &mut vis {
            *v = 0.25 * *v + dark.sample(&mut rng);
        }
    }
    let clamp = |d: Vec<f64>| GrayImage::from_fn(w, h, |x, y| d[y * w + x]);
    let centres = targets.iter().map(|t| (t.cx, t.cy)).collect();
    Ok((clamp(ir), clamp(vis), centres))
}

/// The pseudo-method family, in generation order.
pub const METHODS: [&str; 16] = [
    "average",
    "max",
    "laplacian_blend",
    "weighted_0.1",
    "weighted_0.3",
    "weighted_0.7",
    "weighted_0.9",
    "noisy_0.02",
    "noisy_0.05",
    "noisy_0.10",
    "blur_1",
    "blur_2",
    "ir_only",
    "vis_only",
    "contrast_crushed",
    "blocky_artifact",
];

/// Designed quality ordering of [`METHODS`], best first: balanced clean
/// blends, then mildly degraded or unbalanced ones, then heavy degradation,
/// then single-modality outputs.
pub const APRIORI_ORDER: [&str; 16] = [
    "average",
    "laplacian_blend",
    "weighted_0.3",
    "weighted_0.7",
    "max",
    "noisy_0.02",
    "blur_1",
    "weighted_0.1",
    "weighted_0.9",
    "noisy_0.05",
    "blur_2",
    "contrast_crushed",
    "blocky_artifact",
    "noisy_0.10",
    "vis_only",
    "ir_only",
];

/// 1-based a-priori rank of a method, if it belongs to the family.
pub fn apriori_rank(method: &str) -> Option<usize> {
    APRIORI_ORDER.iter().position(|m| *m == method).map(|p| p + 1)
}

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    bytes.fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed derived from the quantized sources, so fusions need no extra input.
fn content_seed(ir: &GrayImage, vis: &GrayImage) -> u64 {
    fnv1a(ir.to_u8().into_iter().chain(vis.to_u8()))
}

fn blend(ir: &GrayImage, vis: &GrayImage, w_ir: f64) -> GrayImage {
    GrayImage::from_fn(ir.width(), ir.height(), |x, y| w_ir * ir.at(x, y) + (1.0 - w_ir) * vis.at(x, y))
}

fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let k = gaussian_kernel(2 * (3.0 * sigma).ceil() as usize + 1, sigma);
    GrayImage::from_raster_clamped(&separable_same(img, &k, &k))
}

fn laplacian_blend(ir: &GrayImage, vis: &GrayImage) -> GrayImage {
    let bi = separable_same(ir, &BINOMIAL5, &BINOMIAL5);
    let bv = separable_same(vis, &BINOMIAL5, &BINOMIAL5);
    GrayImage::from_fn(ir.width(), ir.height(), |x, y| {
        let (di, dv) = (ir.at(x, y) - bi.at(x, y), vis.at(x, y) - bv.at(x, y));
        let detail = if di.abs() >= dv.abs() { di } else { dv };
        0.5 * (bi.at(x, y) + bv.at(x, y)) + detail
    })
}

fn with_noise(img: &GrayImage, pattern: &[f64], sigma: f64) -> GrayImage {
    let w = img.width();
    GrayImage::from_fn(w, img.height(), |x, y| img.at(x, y) + sigma * pattern[y * w + x])
}

/// Unit-variance Gaussian pattern shared by every noisy variant of a pair, so
/// the variants differ only in amplitude.
fn noise_pattern(ir: &GrayImage, vis: &GrayImage, salt: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(content_seed(ir, vis) ^ salt);
    let n = Normal::new(0.0, 1.0).expect("valid sigma");
    (0..ir.len()).map(|_| n.sample(&mut rng)).collect()
}

/// The sixteen pseudo-methods applied to one source pair, in [`METHODS`] order.
pub fn gen_fusions(ir: &GrayImage, vis: &GrayImage) -> Result<Vec<(String, GrayImage)>> {
    check_same_dims(ir, vis)?;
    check_min_dims(ir, 3, 3)?;
    let (w, h) = (ir.width(), ir.height());
    let avg = blend(ir, vis, 0.5);
    let pattern = noise_pattern(ir, vis, 0x6e6f_6973);
    let mut rng = ChaCha8Rng::seed_from_u64(content_seed(ir, vis) ^ 0x626c_6b73);
    let blocks_x = w.div_ceil(8);
    let offsets: Vec<f64> = (0..blocks_x * h.div_ceil(8)).map(|_| rng.random_range(-0.15..0.15)).collect();
    let m = avg.mean();

    let out: Vec<GrayImage> = METHODS
        .iter()
        .map(|name| match *name {
            "average" => avg.clone(),
            "max" => GrayImage::from_fn(w, h, |x, y| ir.at(x, y).max(vis.at(x, y))),
            "laplacian_blend" => laplacian_blend(ir, vis),
            "weighted_0.1" => blend(ir, vis, 0.1),
            "weighted_0.3" => blend(ir, vis, 0.3),
            "weighted_0.7" => blend(ir, vis, 0.7),
            "weighted_0.9" => blend(ir, vis, 0.9),
            "noisy_0.02" => with_noise(&avg, &pattern, 0.02),
            "noisy_0.05" => with_noise(&avg, &pattern, 0.05),
            "noisy_0.10" => with_noise(&avg, &pattern, 0.10),
            "blur_1" => gaussian_blur(&avg, 1.0),
            "blur_2" => gaussian_blur(&avg, 2.0),
            "ir_only" => ir.clone(),
            "vis_only" => vis.clone(),
            "contrast_crushed" => avg.map(|v| m + 0.3 * (v - m)),
            "blocky_artifact" => GrayImage::from_fn(w, h, |x, y| avg.at(x, y) + offsets[(y / 8) * blocks_x + x / 8]),
            other => unreachable!("unknown method {other}"),
        })
        .collect();
    Ok(METHODS.iter().map(|s| s.to_string()).zip(out).collect())
}

/// Average fusion plus Gaussian noise of increasing amplitude
/// (`sigma = step * k`, `k = 0..levels`); the a-priori order is the generation order.
pub fn gen_noise_graded(ir: &GrayImage, vis: &GrayImage, levels: usize, step: f64) -> Result<Vec<(String, GrayImage)>> {
    check_same_dims(ir, vis)?;
    let avg = blend(ir, vis, 0.5);
    let pattern = noise_pattern(ir, vis, 0x6772_6164);
    Ok((0..levels)
        .map(|k| (format!("noise_{k:02}"), with_noise(&avg, &pattern, step * k as f64)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub scenes: Vec<String>,
    pub methods: Vec<String>,
}

/// Writes `ir/`, `vis/`, `fused/<method>/` PGMs, heuristic `env_labels.json`
/// and `scenes.json` (the specs) under `root`.
pub fn write_dataset(root: &Path, specs: &[SceneSpec]) -> Result<DatasetSummary> {
    if specs.is_empty() {
        return Err(Error::EmptyDataset("no scene specs".into()));
    }
    let mut labels = Vec::with_capacity(specs.len());
    let mut scenes = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let id = scene_id(i);
        let (ir, vis) = gen_pair(spec)?;
        save_pgm(&ir, root.join("ir").join(format!("{id}.pgm")))?;
        save_pgm(&vis, root.join("vis").join(format!("{id}.pgm")))?;
        // fusions are generated from the stored 8-bit sources so the dataset is self-consistent
        let (ir8, vis8) = (requantize(&ir), requantize(&vis));
        for (method, fused) in gen_fusions(&ir8, &vis8)? {
            save_pgm(&fused, root.join("fused").join(&method).join(format!("{id}.pgm")))?;
        }
        let (s_ill, s_obs) = env_heuristic(&vis8);
        labels.push(RawEnvLabel {
            scene_id: id.clone(),
            s_ill,
            s_obs,
        });
        scenes.push(id);
    }
    save_labels(&root.join("env_labels.json"), &labels)?;
    let manifest = serde_json::to_string_pretty(specs).expect("specs serialize");
    let path = root.join("scenes.json");
    std::fs::write(&path, manifest + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(DatasetSummary {
        scenes,
        methods: METHODS.iter().map(|s| s.to_string()).collect(),
    })
}

/// Round-trip through 8 bits, as storing to PGM does.
pub fn requantize(img: &GrayImage) -> GrayImage {
    GrayImage::from_u8(img.width(), img.height(), &img.to_u8()).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    fn spec(regime: Regime) -> SceneSpec {
        SceneSpec::new(42, 64, 48, regime)
    }

    #[test]
    fn pair_is_deterministic() {
        assert_eq!(gen_pair(&spec(Regime::Day)).unwrap(), gen_pair(&spec(Regime::Day)).unwrap());
        let mut other = spec(Regime::Day);
        other.seed = 43;
        assert_ne!(gen_pair(&other).unwrap().0, gen_pair(&spec(Regime::Day)).unwrap().0);
    }

    #[test]
    fn night_is_darker() {
        let (_, day) = gen_pair(&spec(Regime::Day)).unwrap();
        let (_, night) = gen_pair(&spec(Regime::Night)).unwrap();
        assert!(night.mean() < day.mean());
    }

    #[test]
    fn blob_centres_are_hot() {
        for seed in 0..20 {
            let mut s = spec(Regime::Day);
            s.seed = seed;
            s.n_targets = 4;
            let (ir, _, centres) = render(&s).unwrap();
            assert_eq!(centres.len(), 4);
            for (cx, cy) in centres {
                let v = ir.at(cx.round() as usize, cy.round() as usize);
                assert!(v > 0.8, "seed {seed}: {v}");
            }
        }
    }

    #[test]
    fn rejects_tiny_scenes() {
        assert!(matches!(gen_pair(&SceneSpec::new(1, 31, 64, Regime::Day)), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn sixteen_unique_methods_and_identities() {
        let (ir, vis) = gen_pair(&spec(Regime::Day)).unwrap();
        let f = gen_fusions(&ir, &vis).unwrap();
        assert_eq!(f.len(), 16);
        let mut names: Vec<_> = f.iter().map(|(n, _)| n.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 16);
        assert_eq!(f[12].1, ir);
        assert_eq!(f[13].1, vis);
        let mut ranked = APRIORI_ORDER.to_vec();
        ranked.sort();
        let mut all = METHODS.to_vec();
        all.sort();
        assert_eq!(ranked, all);
    }

    #[test]
    fn noise_levels_order_by_psnr() {
        let (ir, vis) = gen_pair(&spec(Regime::Night)).unwrap();
        let f = gen_fusions(&ir, &vis).unwrap();
        let clean = &f[0].1;
        let p: Vec<f64> = (7..10).map(|i| psnr(clean, &f[i].1).unwrap().value).collect();
        assert!(p[0] > p[1] && p[1] > p[2], "{p:?}");
        let g = gen_noise_graded(&ir, &vis, 16, 0.01).unwrap();
        let q: Vec<f64> = g.iter().map(|(_, img)| psnr(clean, img).unwrap().value).collect();
        assert!(q.windows(2).all(|w| w[0] > w[1]), "{q:?}");
    }
}
