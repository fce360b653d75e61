//! Separable filtering helpers. Border policy is edge replication throughout.

use crate::image::{GrayImage, Plane, Raster};

/// Normalized 1-D Gaussian taps of odd length `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    assert!(size % 2 == 1, "kernel size must be odd");
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// 5-tap binomial `[1 4 6 4 1] / 16`.
pub const BINOMIAL5: [f64; 5] = [0.0625, 0.25, 0.375, 0.25, 0.0625];

/// Correlates with `kx` along rows then `ky` along columns, same-size output,
/// edge-replicated borders. Kernels must have odd length.
pub fn separable_same<P: Plane + ?Sized>(src: &P, kx: &[f64], ky: &[f64]) -> Raster {
    let (w, h) = (src.width(), src.height());
    let rx = kx.len() / 2;
    let ry = ky.len() / 2;

    let mut tmp = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * rx];
    for y in 0..h {
        let row = &src.data()[y * w..(y + 1) * w];
        padded[..rx].fill(row[0]);
        padded[rx..rx + w].copy_from_slice(row);
        padded[rx + w..].fill(row[w - 1]);
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let win = &padded[x..x + kx.len()];
            *o = win.iter().zip(kx).map(|(a, b)| a * b).sum();
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (j, &k) in ky.iter().enumerate() {
            let sy = (y as isize + j as isize - ry as isize).clamp(0, h as isize - 1) as usize;
            let srow = &tmp[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += k * s;
            }
        }
    }
    Raster {
        width: w,
        height: h,
        data: out,
    }
}

/// Correlation over fully contained windows only; output is
/// `(w - kx.len() + 1) x (h - ky.len() + 1)`.
pub fn separable_valid(src: &[f64], w: usize, h: usize, kx: &[f64], ky: &[f64]) -> Raster {
    let ow = w + 1 - kx.len();
    let oh = h + 1 - ky.len();
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            *o = row[x..x + kx.len()].iter().zip(kx).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (j, &k) in ky.iter().enumerate() {
            let srow = &tmp[(y + j) * ow..(y + j + 1) * ow];
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += k * s;
            }
        }
    }
    Raster {
        width: ow,
        height: oh,
        data: out,
    }
}

/// Block-average downsampling by an integer factor; trailing partial blocks
/// are averaged over the pixels they contain.
pub fn box_downsample(img: &GrayImage, factor: usize) -> GrayImage {
    assert!(factor >= 1);
    if factor == 1 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let ow = w.div_ceil(factor);
    let oh = h.div_ceil(factor);
    let mut sums = vec![0.0; ow * oh];
    for (y, row) in img.data().chunks_exact(w).enumerate() {
        let out = &mut sums[(y / factor) * ow..(y / factor + 1) * ow];
        for (s, cell) in out.iter_mut().zip(row.chunks(factor)) {
            for &v in cell {
                *s += v;
            }
        }
    }
    let data = sums
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (ox, oy) = (i % ow, i / ow);
            let count = factor.min(w - ox * factor) * factor.min(h - oy * factor);
            (s / count as f64).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage::from_vec_unchecked(ow, oh, data)
}

/// Nearest-neighbour resize to `(w, h)`.
pub fn upsample_nearest<P: Plane + ?Sized>(src: &P, w: usize, h: usize) -> Raster {
    let (sw, sh) = (src.width(), src.height());
    Raster::from_fn(w, h, |x, y| {
        let sx = (x * sw / w).min(sw - 1);
        let sy = (y * sh / h).min(sh - 1);
        src.at(sx, sy)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..5 {
            assert_eq!(k[i], k[10 - i]);
        }
    }

    #[test]
    fn same_filter_matches_naive_clamped_convolution() {
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 13 + y * 7) % 10) as f64 / 10.0);
        let kx = [0.2, 0.5, 0.3];
        let ky = BINOMIAL5;
        let fast = separable_same(&img, &kx, &ky);
        for y in 0..5 {
            for x in 0..7 {
                let mut acc = 0.0;
                for (j, wy) in ky.iter().enumerate() {
                    for (i, wx) in kx.iter().enumerate() {
                        acc += wy * wx * img.at_clamped(x as isize + i as isize - 1, y as isize + j as isize - 2);
                    }
                }
                assert!((fast.at(x, y) - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn box_downsample_handles_partial_blocks() {
        let img = GrayImage::from_fn(3, 3, |x, _| x as f64 / 2.0);
        let d = box_downsample(&img, 2);
        assert_eq!((d.width(), d.height()), (2, 2));
        assert_eq!(d.at(0, 0), 0.25);
        assert_eq!(d.at(1, 0), 1.0);
    }
}
