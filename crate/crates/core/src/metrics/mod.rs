//! Classical fusion quality metrics.
//!
//! Eight full-reference metrics (applied between a source and the fused
//! image) and four reference-free statistics of the fused image. These are
//! also the oracle that produces training targets for the learned surrogate.

pub mod basic;
pub mod fmi;
pub mod nonref;
pub mod qabf;
pub mod ssim;
pub mod vif;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, GrayImage};

pub use basic::{cc, psnr, PSNR_CAP_DB};
pub use fmi::{fmi, FmiFeature};
pub use nonref::{ei, en, sd, sf};
pub use qabf::{qabf, qabf_pairwise};
pub use ssim::ssim;
pub use vif::vif;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricId {
    Vif,
    Qabf,
    Ssim,
    Cc,
    Psnr,
    FmiP,
    FmiDct,
    FmiW,
    En,
    Sd,
    Ei,
    Sf,
}

impl MetricId {
    pub const ALL: [MetricId; 12] = [
        MetricId::Vif,
        MetricId::Qabf,
        MetricId::Ssim,
        MetricId::Cc,
        MetricId::Psnr,
        MetricId::FmiP,
        MetricId::FmiDct,
        MetricId::FmiW,
        MetricId::En,
        MetricId::Sd,
        MetricId::Ei,
        MetricId::Sf,
    ];
    /// Full-reference metrics; also the surrogate head order.
    pub const FULL_REFERENCE: [MetricId; 8] = [
        MetricId::Vif,
        MetricId::Qabf,
        MetricId::Ssim,
        MetricId::Cc,
        MetricId::Psnr,
        MetricId::FmiP,
        MetricId::FmiDct,
        MetricId::FmiW,
    ];
    pub const REFERENCE_FREE: [MetricId; 4] = [MetricId::En, MetricId::Sd, MetricId::Ei, MetricId::Sf];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Vif => "VIF",
            MetricId::Qabf => "QABF",
            MetricId::Ssim => "SSIM",
            MetricId::Cc => "CC",
            MetricId::Psnr => "PSNR",
            MetricId::FmiP => "FMI_P",
            MetricId::FmiDct => "FMI_DCT",
            MetricId::FmiW => "FMI_W",
            MetricId::En => "EN",
            MetricId::Sd => "SD",
            MetricId::Ei => "EI",
            MetricId::Sf => "SF",
        }
    }

    pub fn is_full_reference(self) -> bool {
        Self::FULL_REFERENCE.contains(&self)
    }

    pub fn head_index(self) -> Option<usize> {
        Self::FULL_REFERENCE.iter().position(|&m| m == self)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let alias = match up.as_str() {
            "FMI_PIXEL" => "FMI_P",
            "FMI_WAVELET" => "FMI_W",
            other => other,
        };
        MetricId::ALL
            .into_iter()
            .find(|m| m.name() == alias)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

/// A metric value. Degenerate inputs (constant images, no edges) produce a
/// flagged 0.0 instead of NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    pub fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    pub fn degenerate() -> Self {
        Self {
            value: 0.0,
            degenerate: true,
        }
    }
}

/// Scores keyed by metric; metrics that failed are absent from `scores` and
/// listed in `failures`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub scores: BTreeMap<MetricId, Score>,
    pub failures: BTreeMap<MetricId, String>,
}

impl MetricVector {
    pub fn get(&self, m: MetricId) -> Option<f64> {
        self.scores.get(&m).map(|s| s.value)
    }
}

#[derive(Clone, Debug)]
pub struct FusionTriple {
    pub ir: GrayImage,
    pub vis: GrayImage,
    pub fused: GrayImage,
    pub method_id: String,
    pub scene_id: String,
}

impl FusionTriple {
    pub fn new(
        ir: GrayImage,
        vis: GrayImage,
        fused: GrayImage,
        scene_id: impl Into<String>,
        method_id: impl Into<String>,
    ) -> Result<Self> {
        check_same_dims(&ir, &fused)?;
        check_same_dims(&vis, &fused)?;
        Ok(Self {
            ir,
            vis,
            fused,
            method_id: method_id.into(),
            scene_id: scene_id.into(),
        })
    }
}

/// Source weights of the weighted-sum fusion score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanillaWeights {
    pub w_ir: f64,
    pub w_vis: f64,
}

impl VanillaWeights {
    pub fn new(w_ir: f64, w_vis: f64) -> Result<Self> {
        if !(w_ir >= 0.0 && w_vis >= 0.0 && w_ir.is_finite() && w_vis.is_finite()) {
            return Err(Error::InvalidArgument(format!("weights must be finite and >= 0, got ({w_ir}, {w_vis})")));
        }
        if w_ir == 0.0 && w_vis == 0.0 {
            return Err(Error::InvalidArgument("weights cannot both be zero".into()));
        }
        Ok(Self { w_ir, w_vis })
    }
}

impl Default for VanillaWeights {
    fn default() -> Self {
        Self { w_ir: 1.0, w_vis: 1.0 }
    }
}

/// Full-reference metric between a reference and a candidate. Qabf uses the
/// single-source form weighted by the reference's edges.
pub fn pairwise(metric: MetricId, reference: &GrayImage, candidate: &GrayImage) -> Result<Score> {
    match metric {
        MetricId::Vif => vif(reference, candidate),
        MetricId::Qabf => qabf_pairwise(reference, candidate),
        MetricId::Ssim => ssim(reference, candidate),
        MetricId::Cc => cc(reference, candidate),
        MetricId::Psnr => psnr(reference, candidate),
        MetricId::FmiP => fmi(reference, candidate, FmiFeature::Pixel),
        MetricId::FmiDct => fmi(reference, candidate, FmiFeature::Dct),
        MetricId::FmiW => fmi(reference, candidate, FmiFeature::Wavelet),
        other => Err(Error::InvalidArgument(format!("{other} is reference-free"))),
    }
}

pub fn reference_free(metric: MetricId, img: &GrayImage) -> Result<Score> {
    match metric {
        MetricId::En => Ok(Score::ok(en(img))),
        MetricId::Sd => Ok(Score::ok(sd(img))),
        MetricId::Ei => ei(img).map(Score::ok),
        MetricId::Sf => Ok(Score::ok(sf(img))),
        other => Err(Error::InvalidArgument(format!("{other} needs a reference"))),
    }
}

/// `w_ir Q(I_ir, I_f) + w_vis Q(I_vis, I_f)`. Qabf uses its native two-source
/// form and ignores the weights. Zero-weight terms are not evaluated.
pub fn vanilla_fusion_score(triple: &FusionTriple, metric: MetricId, w: VanillaWeights) -> Result<Score> {
    if !metric.is_full_reference() {
        return Err(Error::InvalidArgument(format!("{metric} is reference-free")));
    }
    if metric == MetricId::Qabf {
        return qabf(&triple.ir, &triple.vis, &triple.fused);
    }
    let mut value = 0.0;
    let mut degenerate = false;
    for (weight, src) in [(w.w_ir, &triple.ir), (w.w_vis, &triple.vis)] {
        if weight == 0.0 {
            continue;
        }
        let s = pairwise(metric, src, &triple.fused)?;
        value += weight * s.value;
        degenerate |= s.degenerate;
    }
    Ok(Score { value, degenerate })
}

pub fn eval_metric(triple: &FusionTriple, metric: MetricId, w: VanillaWeights) -> Result<Score> {
    if metric.is_full_reference() {
        vanilla_fusion_score(triple, metric, w)
    } else {
        reference_free(metric, &triple.fused)
    }
}

/// Evaluates `metrics` on one triple; failures are recorded, never fatal.
pub fn eval_selected(triple: &FusionTriple, metrics: &[MetricId], w: VanillaWeights) -> MetricVector {
    let mut out = MetricVector::default();
    for &m in metrics {
        match eval_metric(triple, m, w) {
            Ok(s) => {
                out.scores.insert(m, s);
            }
            Err(e) => {
                out.failures.insert(m, e.to_string());
            }
        }
    }
    out
}

/// Every full-reference metric in weighted-sum form plus the four
/// reference-free statistics of the fused image.
pub fn eval_all(triple: &FusionTriple, w: VanillaWeights) -> MetricVector {
    eval_selected(triple, &MetricId::ALL, w)
}

/// Evaluates a batch on a pool of `workers` threads. Output order follows
/// input order and values do not depend on the worker count.
pub fn eval_batch(
    triples: &[FusionTriple],
    metrics: &[MetricId],
    w: VanillaWeights,
    workers: usize,
) -> Result<Vec<MetricVector>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| triples.par_iter().map(|t| eval_selected(t, metrics, w)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            0.5 + 0.3 * ((x as f64 * 0.9 + seed as f64).sin() * (y as f64 * 0.6).cos())
                + 0.15 * (((x * 7 + y * 11 + seed) % 5) as f64 / 5.0 - 0.5)
        })
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricId::ALL {
            assert_eq!(m.name().parse::<MetricId>().unwrap(), m);
        }
        assert_eq!("fmi_pixel".parse::<MetricId>().unwrap(), MetricId::FmiP);
        assert!("LPIPS".parse::<MetricId>().is_err());
    }

    #[test]
    fn identity_triple_sums_two_perfect_terms() {
        let x = textured(32, 32, 0);
        let t = FusionTriple::new(x.clone(), x.clone(), x, "s", "m").unwrap();
        let w = VanillaWeights::default();
        assert!((vanilla_fusion_score(&t, MetricId::Ssim, w).unwrap().value - 2.0).abs() < 1e-12);
        let v = eval_all(&t, w);
        assert!((v.get(MetricId::Ssim).unwrap() - 2.0).abs() < 1e-12);
        assert!((v.get(MetricId::Cc).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(v.get(MetricId::Psnr).unwrap(), 200.0);
        assert!(v.failures.is_empty());
    }

    #[test]
    fn zero_weight_annihilates_term() {
        let t = FusionTriple::new(textured(32, 32, 1), textured(32, 32, 2), textured(32, 32, 3), "s", "m").unwrap();
        let w = VanillaWeights::new(1.0, 0.0).unwrap();
        for m in [MetricId::Ssim, MetricId::Cc, MetricId::Psnr, MetricId::Vif] {
            let got = vanilla_fusion_score(&t, m, w).unwrap().value;
            assert_eq!(got, pairwise(m, &t.ir, &t.fused).unwrap().value);
        }
    }

    #[test]
    fn cc_sum_is_compositional() {
        let t = FusionTriple::new(textured(24, 20, 4), textured(24, 20, 5), textured(24, 20, 6), "s", "m").unwrap();
        let got = vanilla_fusion_score(&t, MetricId::Cc, VanillaWeights::default()).unwrap().value;
        let expect = cc(&t.ir, &t.fused).unwrap().value + cc(&t.vis, &t.fused).unwrap().value;
        assert_eq!(got, expect);
    }

    #[test]
    fn constant_triple_flags_and_zeroes() {
        let c = GrayImage::constant(32, 32, 0.4);
        let t = FusionTriple::new(c.clone(), c.clone(), c, "s", "m").unwrap();
        let v = eval_all(&t, VanillaWeights::default());
        for m in MetricId::REFERENCE_FREE {
            assert_eq!(v.get(m), Some(0.0));
        }
        assert!(v.scores[&MetricId::Cc].degenerate);
        // every FMI window is flat
        assert!(v.failures.contains_key(&MetricId::FmiP));
    }

    #[test]
    fn weights_validated() {
        assert!(VanillaWeights::new(0.0, 0.0).is_err());
        assert!(VanillaWeights::new(-1.0, 1.0).is_err());
        assert!(VanillaWeights::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn triple_dims_checked() {
        assert!(FusionTriple::new(GrayImage::zeros(4, 4), GrayImage::zeros(4, 4), GrayImage::zeros(4, 5), "s", "m").is_err());
    }

    #[test]
    fn batch_is_worker_independent() {
        let triples: Vec<_> = (0..6)
            .map(|i| FusionTriple::new(textured(32, 32, i), textured(32, 32, i + 10), textured(32, 32, i + 20), format!("s{i}"), "m").unwrap())
            .collect();
        let w = VanillaWeights::default();
        let one = eval_batch(&triples, &MetricId::ALL, w, 1).unwrap();
        let four = eval_batch(&triples, &MetricId::ALL, w, 4).unwrap();
        assert_eq!(one, four);
    }
}
