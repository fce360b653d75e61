//! Pixel-domain multiscale visual information fidelity.
//!
//! Scales come from [`gaussian_pyramid`]. At each scale local means and
//! (co)variances are taken over a 9x9 Gaussian window (sigma 1.8) with
//! edge-replicated borders, and the Gaussian scale-mixture channel model gives
//! per-pixel information terms. The score is the ratio of summed information
//! the distorted image preserves to the information in the reference, pooled
//! across all scales. Constants from the 8-bit formulation are divided by
//! `255^2` for the unit intensity range.

use crate::error::Result;
use crate::image::{check_min_dims, check_same_dims, GrayImage, Plane};
use crate::metrics::Score;
use crate::transform::filter::{gaussian_kernel, separable_same};
use crate::transform::gaussian_pyramid;
use crate::transform::pyramid::MIN_LEVEL_SIDE;

pub const VIF_MAX_SCALES: usize = 4;
pub const VIF_WINDOW: usize = 9;
pub const VIF_SIGMA: f64 = 1.8;
/// Visual noise variance, `2 / 255^2`.
pub const VIF_NOISE_VAR: f64 = 2.0 / (255.0 * 255.0);
/// Variance floor, `1e-10 / 255^2`.
pub const VIF_EPS: f64 = 1e-10 / (255.0 * 255.0);

/// Number of scales used for an image whose shorter side is `min_side`: up to
/// four, fewer when the coarsest level would drop below 8 pixels.
pub fn vif_scales(min_side: usize) -> usize {
    (1..=VIF_MAX_SCALES)
        .rev()
        .find(|&s| min_side >> (s - 1) >= MIN_LEVEL_SIDE)
        .unwrap_or(0)
}

pub fn vif(reference: &GrayImage, distorted: &GrayImage) -> Result<Score> {
    check_same_dims(reference, distorted)?;
    check_min_dims(reference, MIN_LEVEL_SIDE, MIN_LEVEL_SIDE)?;
    let scales = vif_scales(reference.width().min(reference.height()));
    let ref_pyr = gaussian_pyramid(reference, scales)?;
    let dist_pyr = gaussian_pyramid(distorted, scales)?;
    let k = gaussian_kernel(VIF_WINDOW, VIF_SIGMA);

    let (mut num, mut den) = (0.0, 0.0);
    for (r, d) in ref_pyr.iter().zip(&dist_pyr) {
        let rr: Vec<f64> = r.data().iter().map(|v| v * v).collect();
        let dd: Vec<f64> = d.data().iter().map(|v| v * v).collect();
        let rd: Vec<f64> = r.data().iter().zip(d.data()).map(|(a, b)| a * b).collect();
        let (w, h) = (r.width(), r.height());
        let wrap = |v: Vec<f64>| crate::image::Raster { width: w, height: h, data: v };
        let mu1 = separable_same(r, &k, &k);
        let mu2 = separable_same(d, &k, &k);
        let e11 = separable_same(&wrap(rr), &k, &k);
        let e22 = separable_same(&wrap(dd), &k, &k);
        let e12 = separable_same(&wrap(rd), &k, &k);
        for i in 0..mu1.data.len() {
            let (m1, m2) = (mu1.data[i], mu2.data[i]);
            let (n, dn) = vif_terms(
                e11.data[i] - m1 * m1,
                e22.data[i] - m2 * m2,
                e12.data[i] - m1 * m2,
            );
            num += n;
            den += dn;
        }
    }
    if den == 0.0 {
        return Ok(Score::degenerate());
    }
    Ok(Score::ok(num / den))
}

/// Per-pixel `(numerator, denominator)` information terms from local
/// reference variance, distorted variance and covariance.
#[inline]
pub(crate) fn vif_terms(var_ref: f64, var_dist: f64, cov: f64) -> (f64, f64) {
    let mut s1 = var_ref.max(0.0);
    let s2 = var_dist.max(0.0);
    let mut g = cov / (s1 + VIF_EPS);
    let mut sv = s2 - g * cov;
    if s1 < VIF_EPS {
        g = 0.0;
        sv = s2;
        s1 = 0.0;
    }
    if s2 < VIF_EPS {
        g = 0.0;
        sv = 0.0;
    }
    if g < 0.0 {
        sv = s2;
        g = 0.0;
    }
    if sv <= VIF_EPS {
        sv = VIF_EPS;
    }
    let num = (1.0 + g * g * s1 / (sv + VIF_NOISE_VAR)).log10();
    let den = (1.0 + s1 / VIF_NOISE_VAR).log10();
    (num, den)
}
