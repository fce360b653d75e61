//! Gradient-based edge preservation (Xydeas–Petrović `Q^{AB/F}`).
//!
//! Per pixel, relative edge strength `G` and orientation agreement `A` between
//! a source and the fused image pass through sigmoids; the products are
//! averaged with source edge strength as weight.

use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::image::{check_min_dims, check_same_dims, GrayImage};
use crate::metrics::Score;
use crate::transform::{sobel, GradientField};

pub const GAMMA_G: f64 = 0.9994;
pub const KAPPA_G: f64 = -15.0;
pub const SIGMA_G: f64 = 0.5;
pub const GAMMA_A: f64 = 0.9879;
pub const KAPPA_A: f64 = -22.0;
pub const SIGMA_A: f64 = 0.8;

/// Preservation value of one pixel, from source and fused gradient strength
/// and orientation.
#[inline]
pub fn edge_preservation(g_src: f64, a_src: f64, g_fused: f64, a_fused: f64) -> f64 {
    let strength = if g_src > g_fused {
        g_fused / g_src
    } else if g_src < g_fused {
        g_src / g_fused
    } else {
        1.0
    };
    let orient = 1.0 - (a_src - a_fused).abs() / FRAC_PI_2;
    let qg = GAMMA_G / (1.0 + (KAPPA_G * (strength - SIGMA_G)).exp());
    let qa = GAMMA_A / (1.0 + (KAPPA_A * (orient - SIGMA_A)).exp());
    qg * qa
}

/// Largest attainable score: both sigmoids at perfect agreement.
pub fn qabf_ceiling() -> f64 {
    edge_preservation(1.0, 0.0, 1.0, 0.0)
}

fn accumulate(src: &GradientField, fused: &GradientField, num: &mut f64, den: &mut f64) {
    let gs = &src.magnitude.data;
    let asrc = &src.orientation.data;
    let gf = &fused.magnitude.data;
    let af = &fused.orientation.data;
    for i in 0..gs.len() {
        let w = gs[i];
        if w == 0.0 {
            continue;
        }
        *num += edge_preservation(w, asrc[i], gf[i], af[i]) * w;
        *den += w;
    }
}

/// Two-source form: `sum(Q_AF g_A + Q_BF g_B) / sum(g_A + g_B)`.
pub fn qabf(ir: &GrayImage, vis: &GrayImage, fused: &GrayImage) -> Result<Score> {
    check_same_dims(ir, fused)?;
    check_same_dims(vis, fused)?;
    check_min_dims(fused, 3, 3)?;
    let (ga, gb, gf) = (sobel(ir)?, sobel(vis)?, sobel(fused)?);
    let (mut num, mut den) = (0.0, 0.0);
    // interleave per pixel so the summation order matches the per-pixel definition
    let n = gf.magnitude.data.len();
    for i in 0..n {
        let (wa, wb) = (ga.magnitude.data[i], gb.magnitude.data[i]);
        let (gfi, afi) = (gf.magnitude.data[i], gf.orientation.data[i]);
        if wa != 0.0 {
            num += edge_preservation(wa, ga.orientation.data[i], gfi, afi) * wa;
        }
        if wb != 0.0 {
            num += edge_preservation(wb, gb.orientation.data[i], gfi, afi) * wb;
        }
        den += wa + wb;
    }
    Ok(finish(num, den))
}

/// Single-source form, weighted by the source's edges only.
pub fn qabf_pairwise(src: &GrayImage, comp: &GrayImage) -> Result<Score> {
    check_same_dims(src, comp)?;
    check_min_dims(src, 3, 3)?;
    let (gs, gc) = (sobel(src)?, sobel(comp)?);
    let (mut num, mut den) = (0.0, 0.0);
    accumulate(&gs, &gc, &mut num, &mut den);
    Ok(finish(num, den))
}

fn finish(num: f64, den: f64) -> Score {
    if den == 0.0 {
        Score::degenerate()
    } else {
        Score::ok(num / den)
    }
}
