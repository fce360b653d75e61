//! Single-level orthonormal 2-D Haar analysis.
//!
//! For a 2x2 cell `a b / c d` the subbands are
//! `LL = (a+b+c+d)/2`, `LH = (a+b-c-d)/2`, `HL = (a-b+c-d)/2`,
//! `HH = (a-b-c+d)/2`. With this orthonormal scaling a constant image `v`
//! gives `LL = 2v`. Odd dimensions are extended by edge replication.

use crate::image::{Plane, Raster};

#[derive(Clone, Debug)]
pub struct HaarBands {
    pub ll: Raster,
    /// Horizontal low-pass, vertical high-pass.
    pub lh: Raster,
    /// Horizontal high-pass, vertical low-pass.
    pub hl: Raster,
    pub hh: Raster,
}

pub fn haar_dwt1<P: Plane + ?Sized>(img: &P) -> HaarBands {
    let w2 = img.width().div_ceil(2);
    let h2 = img.height().div_ceil(2);
    let mut ll = Raster::zeros(w2, h2);
    let mut lh = Raster::zeros(w2, h2);
    let mut hl = Raster::zeros(w2, h2);
    let mut hh = Raster::zeros(w2, h2);
    for y in 0..h2 {
        for x in 0..w2 {
            let (x0, y0) = (2 * x as isize, 2 * y as isize);
            let a = img.at_clamped(x0, y0);
            let b = img.at_clamped(x0 + 1, y0);
            let c = img.at_clamped(x0, y0 + 1);
            let d = img.at_clamped(x0 + 1, y0 + 1);
            ll.set(x, y, (a + b + c + d) * 0.5);
            lh.set(x, y, (a + b - c - d) * 0.5);
            hl.set(x, y, (a - b + c - d) * 0.5);
            hh.set(x, y, (a - b - c + d) * 0.5);
        }
    }
    HaarBands { ll, lh, hl, hh }
}

/// Synthesis; returns a `(2 * w) x (2 * h)` raster.
pub fn haar_idwt1(bands: &HaarBands) -> Raster {
    let (w2, h2) = (bands.ll.width, bands.ll.height);
    let mut out = Raster::zeros(2 * w2, 2 * h2);
    for y in 0..h2 {
        for x in 0..w2 {
            let (s, v, hz, dg) = (
                bands.ll.at(x, y),
                bands.lh.at(x, y),
                bands.hl.at(x, y),
                bands.hh.at(x, y),
            );
            out.set(2 * x, 2 * y, (s + v + hz + dg) * 0.5);
            out.set(2 * x + 1, 2 * y, (s + v - hz - dg) * 0.5);
            out.set(2 * x, 2 * y + 1, (s - v + hz - dg) * 0.5);
            out.set(2 * x + 1, 2 * y + 1, (s - v - hz + dg) * 0.5);
        }
    }
    out
}
