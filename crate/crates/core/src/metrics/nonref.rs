//! Reference-free statistics of a single image.

use crate::error::Result;
use crate::image::{GrayImage, Plane};
use crate::metrics::basic::is_constant;
use crate::transform::gradient::sobel_xy;
use crate::transform::histogram256;

/// Shannon entropy (bits) of the 256-bin histogram.
pub fn en(img: &GrayImage) -> f64 {
    histogram256(img).entropy()
}

/// Population standard deviation.
pub fn sd(img: &GrayImage) -> f64 {
    if is_constant(img) {
        return 0.0;
    }
    let m = img.mean();
    let var = img.data().iter().map(|v| (v - m) * (v - m)).sum::<f64>() / img.len() as f64;
    var.sqrt()
}

/// Mean Sobel gradient magnitude.
pub fn ei(img: &GrayImage) -> Result<f64> {
    let (gx, gy) = sobel_xy(img)?;
    let sum: f64 = gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).sum();
    Ok(sum / img.len() as f64)
}

/// `sqrt(RF^2 + CF^2)`, where RF and CF are the RMS of horizontal and vertical
/// first differences respectively.
pub fn sf(img: &GrayImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let mut rf = 0.0;
    let mut cf = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = d[y * w + x];
            if x > 0 {
                let t = v - d[y * w + x - 1];
                rf += t * t;
            }
            if y > 0 {
                let t = v - d[(y - 1) * w + x];
                cf += t * t;
            }
        }
    }
    let rf2 = if w > 1 { rf / (h * (w - 1)) as f64 } else { 0.0 };
    let cf2 = if h > 1 { cf / ((h - 1) * w) as f64 } else { 0.0 };
    (rf2 + cf2).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_scores_zero() {
        let c = GrayImage::constant(9, 7, 0.6);
        assert_eq!(en(&c), 0.0);
        assert_eq!(sd(&c), 0.0);
        assert_eq!(ei(&c).unwrap(), 0.0);
        assert_eq!(sf(&c), 0.0);
    }

    #[test]
    fn uniform_levels_give_eight_bits() {
        let img = GrayImage::from_fn(32, 32, |x, y| ((y * 32 + x) % 256) as f64 / 255.0);
        assert!((en(&img) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ei_needs_three_pixels() {
        assert!(ei(&GrayImage::zeros(2, 8)).is_err());
    }

    #[test]
    fn sf_of_stripes() {
        // alternating columns 0/1: every horizontal difference is 1, vertical 0
        let img = GrayImage::from_fn(6, 4, |x, _| (x % 2) as f64);
        assert!((sf(&img) - 1.0).abs() < 1e-15);
    }
}
