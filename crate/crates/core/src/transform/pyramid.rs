use crate::error::{Error, Result};
use crate::image::{check_min_dims, GrayImage, Plane};
use crate::transform::filter::{separable_same, BINOMIAL5};

/// Smallest side a pyramid level may have.
pub const MIN_LEVEL_SIDE: usize = 8;

/// Blur-then-decimate pyramid; level 0 is the input. Each step applies the
/// 5-tap binomial in both directions and keeps even rows and columns, so a
/// level has `ceil(dim / 2)` of its parent's size.
pub fn gaussian_pyramid(img: &GrayImage, levels: usize) -> Result<Vec<GrayImage>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
    }
    let need = MIN_LEVEL_SIDE << (levels - 1);
    check_min_dims(img, need, need)?;
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for _ in 1..levels {
        let prev = out.last().unwrap();
        out.push(reduce(prev));
    }
    Ok(out)
}

/// One blur + decimate step.
pub fn reduce(img: &GrayImage) -> GrayImage {
    let blurred = separable_same(img, &BINOMIAL5, &BINOMIAL5);
    let (w2, h2) = (img.width().div_ceil(2), img.height().div_ceil(2));
    let mut data = Vec::with_capacity(w2 * h2);
    for y in 0..h2 {
        for x in 0..w2 {
            // convex combination of [0, 1] values with dyadic weights stays in range
            data.push(blurred.at(2 * x, 2 * y).clamp(0.0, 1.0));
        }
    }
    GrayImage::from_vec_unchecked(w2, h2, data)
}
