use crate::error::Result;
use crate::image::{check_same_dims, GrayImage, Plane};
use crate::metrics::Score;

/// PSNR value reported for identical images (and the upper clamp in general).
pub const PSNR_CAP_DB: f64 = 100.0;

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_same_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(1 / MSE)` on the unit intensity range, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<Score> {
    let m = mse(a, b)?;
    let v = if m == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB)
    };
    Ok(Score::ok(v))
}

/// Pearson correlation of the flattened pixels. A constant input yields a
/// flagged 0.0.
pub fn cc(a: &GrayImage, b: &GrayImage) -> Result<Score> {
    check_same_dims(a, b)?;
    if is_constant(a) || is_constant(b) {
        return Ok(Score::degenerate());
    }
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    Ok(Score::ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)))
}

pub(crate) fn is_constant(img: &GrayImage) -> bool {
    let first = img.data()[0];
    img.data().iter().all(|&v| v == first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn textured() -> GrayImage {
        GrayImage::from_fn(12, 9, |x, y| ((x * 7 + y * 13) % 11) as f64 / 11.0)
    }

    #[test]
    fn psnr_identity_is_capped() {
        let x = textured();
        assert_eq!(psnr(&x, &x).unwrap().value, PSNR_CAP_DB);
    }

    #[test]
    fn psnr_known_mse() {
        let a = GrayImage::zeros(4, 4);
        let b = GrayImage::constant(4, 4, 0.5);
        assert!((psnr(&a, &b).unwrap().value - 10.0 * 4f64.log10()).abs() < 1e-12);
        assert!((psnr(&a, &b).unwrap().value - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn psnr_dim_mismatch() {
        assert!(matches!(
            psnr(&GrayImage::zeros(3, 3), &GrayImage::zeros(3, 4)),
            Err(Error::DimMismatch(..))
        ));
    }

    #[test]
    fn cc_affine_cases() {
        let x = textured();
        assert!((cc(&x, &x).unwrap().value - 1.0).abs() < 1e-12);
        let y = x.map(|v| 0.5 * v + 0.1);
        assert!((cc(&x, &y).unwrap().value - 1.0).abs() < 1e-12);
        let z = x.map(|v| 1.0 - v);
        assert!((cc(&x, &z).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cc_constant_is_flagged_zero() {
        let s = cc(&textured(), &GrayImage::constant(12, 9, 0.2)).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.degenerate);
    }
}
