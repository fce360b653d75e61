use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::image::{check_min_dims, Plane, Raster};

/// Sobel responses of an image.
///
/// `gx` uses `[-1 0 1; -2 0 2; -1 0 1]` (positive for intensity increasing to
/// the right), `gy` its transpose (positive increasing downwards). Orientation
/// is `atan(gy / gx)` in `(-pi/2, pi/2]`, with `gx == 0` mapped to `pi/2`.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub gx: Raster,
    pub gy: Raster,
    pub magnitude: Raster,
    pub orientation: Raster,
}

pub fn sobel<P: Plane + ?Sized>(img: &P) -> Result<GradientField> {
    let (gx, gy) = sobel_xy(img)?;
    let magnitude = Raster {
        width: gx.width,
        height: gx.height,
        data: gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).collect(),
    };
    let orientation = Raster {
        width: gx.width,
        height: gx.height,
        data: gx
            .data
            .iter()
            .zip(&gy.data)
            .map(|(&x, &y)| orientation(x, y))
            .collect(),
    };
    Ok(GradientField {
        gx,
        gy,
        magnitude,
        orientation,
    })
}

#[inline]
pub(crate) fn orientation(gx: f64, gy: f64) -> f64 {
    if gx == 0.0 {
        FRAC_PI_2
    } else {
        (gy / gx).atan()
    }
}

/// Just the two derivative rasters.
pub fn sobel_xy<P: Plane + ?Sized>(img: &P) -> Result<(Raster, Raster)> {
    check_min_dims(img, 3, 3)?;
    let (w, h) = (img.width(), img.height());
    let pw = w + 2;
    let mut pad = vec![0.0; pw * (h + 2)];
    for py in 0..h + 2 {
        let sy = py.saturating_sub(1).min(h - 1);
        let src = &img.data()[sy * w..(sy + 1) * w];
        let dst = &mut pad[py * pw..(py + 1) * pw];
        dst[0] = src[0];
        dst[1..=w].copy_from_slice(src);
        dst[w + 1] = src[w - 1];
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let r0 = &pad[y * pw..(y + 1) * pw];
        let r1 = &pad[(y + 1) * pw..(y + 2) * pw];
        let r2 = &pad[(y + 2) * pw..(y + 3) * pw];
        let ox = &mut gx[y * w..(y + 1) * w];
        let oy = &mut gy[y * w..(y + 1) * w];
        for x in 0..w {
            let (a, b, c) = (r0[x], r0[x + 1], r0[x + 2]);
            let (d, f) = (r1[x], r1[x + 2]);
            let (g, hh, i) = (r2[x], r2[x + 1], r2[x + 2]);
            ox[x] = (c - a) + 2.0 * (f - d) + (i - g);
            oy[x] = (g - a) + 2.0 * (hh - b) + (i - c);
        }
    }
    Ok((
        Raster {
            width: w,
            height: h,
            data: gx,
        },
        Raster {
            width: w,
            height: h,
            data: gy,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::image::GrayImage;

    const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

    fn naive_gx(img: &GrayImage, x: usize, y: usize) -> f64 {
        let mut acc = 0.0;
        for (j, row) in KX.iter().enumerate() {
            for (i, k) in row.iter().enumerate() {
                acc += k * img.at_clamped(x as isize + i as isize - 1, y as isize + j as isize - 1);
            }
        }
        acc
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = sobel(&GrayImage::constant(6, 4, 0.7)).unwrap();
        assert!(g.gx.data.iter().chain(&g.gy.data).all(|&v| v == 0.0));
        assert!(g.orientation.data.iter().all(|&v| v == FRAC_PI_2));
    }

    #[test]
    fn vertical_step_edge_is_local() {
        let c = 4;
        let img = GrayImage::from_fn(9, 7, |x, _| if x >= c { 1.0 } else { 0.0 });
        let g = sobel(&img).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                if x + 1 < c || x > c {
                    assert_eq!(g.gx.at(x, y), 0.0, "({x},{y})");
                } else {
                    assert!(g.gx.at(x, y) > 0.0);
                }
                assert_eq!(g.gy.at(x, y), 0.0);
            }
        }
    }

    #[test]
    fn ramp_interior_matches_direct_convolution() {
        let img = GrayImage::from_fn(5, 5, |x, _| x as f64 / 4.0);
        let g = sobel(&img).unwrap();
        for y in 1..4 {
            for x in 1..4 {
                let expect = naive_gx(&img, x, y);
                assert!((g.gx.at(x, y) - expect).abs() < 1e-12);
                assert!((g.gx.at(x, y) - 2.0).abs() < 1e-12);
            }
        }
        for y in 0..5 {
            for x in 0..5 {
                assert!((g.gx.at(x, y) - naive_gx(&img, x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_small_rejected() {
        assert!(matches!(
            sobel(&GrayImage::zeros(2, 5)),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn magnitude_matches_components() {
        let img = GrayImage::from_fn(8, 8, |x, y| ((x * x + 3 * y) % 7) as f64 / 7.0);
        let g = sobel(&img).unwrap();
        for i in 0..64 {
            let m = (g.gx.data[i].powi(2) + g.gy.data[i].powi(2)).sqrt();
            assert!((g.magnitude.data[i] - m).abs() < 1e-9);
            let o = g.orientation.data[i];
            assert!(o > -FRAC_PI_2 && o <= FRAC_PI_2);
        }
    }
}
