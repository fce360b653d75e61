//! Straight-from-definition metric implementations used as test oracles.
//!
//! Nothing here calls into the library's transforms or metric kernels: every
//! filter is a direct double loop with edge-clamped indexing, every transform
//! is evaluated from its defining sum.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

/// Plain row-major raster for the oracles.
#[derive(Clone, Debug)]
pub struct Img {
    pub w: usize,
    pub h: usize,
    pub px: Vec<f64>,
}

impl Img {
    pub fn new(w: usize, h: usize, px: Vec<f64>) -> Self {
        assert_eq!(px.len(), w * h);
        Self { w, h, px }
    }

    pub fn get(&self, x: isize, y: isize) -> f64 {
        let cx = x.max(0).min(self.w as isize - 1) as usize;
        let cy = y.max(0).min(self.h as isize - 1) as usize;
        self.px[cy * self.w + cx]
    }
}

pub fn psnr(a: &Img, b: &Img) -> f64 {
    let mut se = 0.0;
    for y in 0..a.h {
        for x in 0..a.w {
            let d = a.px[y * a.w + x] - b.px[y * b.w + x];
            se += d * d;
        }
    }
    let mse = se / (a.w * a.h) as f64;
    if mse == 0.0 {
        100.0
    } else {
        (10.0 * (1.0 / mse).log10()).min(100.0)
    }
}

pub fn cc(a: &Img, b: &Img) -> f64 {
    let n = a.px.len() as f64;
    let ma = a.px.iter().sum::<f64>() / n;
    let mb = b.px.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.px.len() {
        num += (a.px[i] - ma) * (b.px[i] - mb);
        da += (a.px[i] - ma).powi(2);
        db += (b.px[i] - mb).powi(2);
    }
    num / (da * db).sqrt()
}

fn gauss_2d(size: usize, sigma: f64) -> Vec<Vec<f64>> {
    let r = (size / 2) as f64;
    let mut k = vec![vec![0.0; size]; size];
    let mut total = 0.0;
    for (j, row) in k.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let (dx, dy) = (i as f64 - r, j as f64 - r);
            *v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    for row in k.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    k
}

pub fn ssim(a: &Img, b: &Img) -> f64 {
    let k = gauss_2d(11, 1.5);
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=a.h - 11 {
        for x0 in 0..=a.w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let wgt = k[j][i];
                    let va = a.px[(y0 + j) * a.w + x0 + i];
                    let vb = b.px[(y0 + j) * b.w + x0 + i];
                    ma += wgt * va;
                    mb += wgt * vb;
                    saa += wgt * va * va;
                    sbb += wgt * vb * vb;
                    sab += wgt * va * vb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn reduce(img: &Img) -> Img {
    let b = [1.0, 4.0, 6.0, 4.0, 1.0];
    let (w2, h2) = (img.w.div_ceil(2), img.h.div_ceil(2));
    let mut px = vec![0.0; w2 * h2];
    for y in 0..h2 {
        for x in 0..w2 {
            let mut acc = 0.0;
            for j in 0..5 {
                for i in 0..5 {
                    acc += b[i] * b[j] / 256.0
                        * img.get(2 * x as isize + i as isize - 2, 2 * y as isize + j as isize - 2);
                }
            }
            px[y * w2 + x] = acc;
        }
    }
    Img::new(w2, h2, px)
}

/// Pixel-domain multiscale VIF on the unit intensity range.
pub fn vif(reference: &Img, distorted: &Img) -> f64 {
    let sigma_n = 2.0 / 65025.0;
    let eps = 1e-10 / 65025.0;
    let min_side = reference.w.min(reference.h);
    let mut scales = 0;
    for s in 1..=4 {
        if min_side / (1 << (s - 1)) >= 8 {
            scales = s;
        }
    }
    let k = gauss_2d(9, 1.8);
    let mut r = reference.clone();
    let mut d = distorted.clone();
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..scales {
        if s > 0 {
            r = reduce(&r);
            d = reduce(&d);
        }
        for y in 0..r.h {
            for x in 0..r.w {
                let (mut m1, mut m2, mut e11, mut e22, mut e12) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..9 {
                    for i in 0..9 {
                        let wgt = k[j][i];
                        let (xx, yy) = (x as isize + i as isize - 4, y as isize + j as isize - 4);
                        let a = r.get(xx, yy);
                        let b = d.get(xx, yy);
                        m1 += wgt * a;
                        m2 += wgt * b;
                        e11 += wgt * a * a;
                        e22 += wgt * b * b;
                        e12 += wgt * a * b;
                    }
                }
                let mut s1 = f64::max(e11 - m1 * m1, 0.0);
                let s2 = f64::max(e22 - m2 * m2, 0.0);
                let s12 = e12 - m1 * m2;
                let mut g = s12 / (s1 + eps);
                let mut sv = s2 - g * s12;
                if s1 < eps {
                    g = 0.0;
                    sv = s2;
                    s1 = 0.0;
                }
                if s2 < eps {
                    g = 0.0;
                    sv = 0.0;
                }
                if g < 0.0 {
                    sv = s2;
                    g = 0.0;
                }
                if sv <= eps {
                    sv = eps;
                }
                num += (1.0 + g * g * s1 / (sv + sigma_n)).log10();
                den += (1.0 + s1 / sigma_n).log10();
            }
        }
    }
    num / den
}

fn sobel(img: &Img) -> (Vec<f64>, Vec<f64>) {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut gx = vec![0.0; img.w * img.h];
    let mut gy = vec![0.0; img.w * img.h];
    for y in 0..img.h {
        for x in 0..img.w {
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let v = img.get(x as isize + i as isize - 1, y as isize + j as isize - 1);
                    sx += kx[j][i] * v;
                    sy += kx[i][j] * v;
                }
            }
            gx[y * img.w + x] = sx;
            gy[y * img.w + x] = sy;
        }
    }
    (gx, gy)
}

fn strength_and_angle(img: &Img) -> (Vec<f64>, Vec<f64>) {
    let (gx, gy) = sobel(img);
    let g = gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    let a = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| if x == 0.0 { FRAC_PI_2 } else { (y / x).atan() })
        .collect();
    (g, a)
}

fn q_pixel(g_s: f64, a_s: f64, g_f: f64, a_f: f64) -> f64 {
    let gr = if g_s == g_f { 1.0 } else { g_s.min(g_f) / g_s.max(g_f) };
    let ar = 1.0 - (a_s - a_f).abs() / (PI / 2.0);
    let qg = 0.9994 / (1.0 + (-15.0 * (gr - 0.5)).exp());
    let qa = 0.9879 / (1.0 + (-22.0 * (ar - 0.8)).exp());
    qg * qa
}

pub fn qabf(ir: &Img, vis: &Img, fused: &Img) -> f64 {
    let (ga, aa) = strength_and_angle(ir);
    let (gb, ab) = strength_and_angle(vis);
    let (gf, af) = strength_and_angle(fused);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..gf.len() {
        if ga[i] > 0.0 {
            num += q_pixel(ga[i], aa[i], gf[i], af[i]) * ga[i];
        }
        if gb[i] > 0.0 {
            num += q_pixel(gb[i], ab[i], gf[i], af[i]) * gb[i];
        }
        den += ga[i] + gb[i];
    }
    num / den
}

pub fn qabf_pairwise(src: &Img, comp: &Img) -> f64 {
    let (gs, as_) = strength_and_angle(src);
    let (gc, ac) = strength_and_angle(comp);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..gs.len() {
        if gs[i] > 0.0 {
            num += q_pixel(gs[i], as_[i], gc[i], ac[i]) * gs[i];
            den += gs[i];
        }
    }
    num / den
}

#[derive(Clone, Copy, Debug)]
pub enum Feature {
    Pixel,
    Dct,
    Wavelet,
}

fn feature(img: &Img, f: Feature) -> Img {
    match f {
        Feature::Pixel => img.clone(),
        Feature::Dct => {
            let (bw, bh) = (img.w.div_ceil(8), img.h.div_ceil(8));
            let (w, h) = (bw * 8, bh * 8);
            let mut px = vec![0.0; w * h];
            for by in 0..bh {
                for bx in 0..bw {
                    for v in 0..8 {
                        for u in 0..8 {
                            if u == 0 && v == 0 {
                                continue;
                            }
                            let cu = if u == 0 { 0.125f64.sqrt() } else { 0.5 };
                            let cv = if v == 0 { 0.125f64.sqrt() } else { 0.5 };
                            let mut acc = 0.0;
                            for y in 0..8 {
                                for x in 0..8 {
                                    let (ix, iy) = (bx * 8 + x, by * 8 + y);
                                    let p = if ix < img.w && iy < img.h { img.px[iy * img.w + ix] } else { 0.0 };
                                    acc += p
                                        * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
                                        * ((2 * y + 1) as f64 * v as f64 * PI / 16.0).cos();
                                }
                            }
                            px[(by * 8 + v) * w + bx * 8 + u] = (cu * cv * acc).abs();
                        }
                    }
                }
            }
            Img::new(w, h, px)
        }
        Feature::Wavelet => {
            let (w2, h2) = (img.w.div_ceil(2), img.h.div_ceil(2));
            let mut px = vec![0.0; w2 * h2];
            for y in 0..h2 {
                for x in 0..w2 {
                    let (x0, y0) = (2 * x as isize, 2 * y as isize);
                    let (a, b, c, d) = (img.get(x0, y0), img.get(x0 + 1, y0), img.get(x0, y0 + 1), img.get(x0 + 1, y0 + 1));
                    let lh = (a + b - c - d) / 2.0;
                    let hl = (a - b + c - d) / 2.0;
                    let hh = (a - b - c + d) / 2.0;
                    px[y * w2 + x] = (lh * lh + hl * hl + hh * hh).sqrt();
                }
            }
            Img::new(w2, h2, px)
        }
    }
}

fn levels(vals: &[f64]) -> Vec<usize> {
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    vals.iter()
        .map(|&v| if hi > lo { (((v - lo) / (hi - lo) * 4.0) as usize).min(3) } else { 0 })
        .collect()
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// `None` when every window is flat in both images.
pub fn fmi(a: &Img, b: &Img, f: Feature) -> Option<f64> {
    let fa = feature(a, f);
    let fb = feature(b, f);
    let mut total = 0.0;
    let mut used = 0;
    for wy in 0..fa.h / 8 {
        for wx in 0..fa.w / 8 {
            let mut va = Vec::new();
            let mut vb = Vec::new();
            for y in 0..8 {
                for x in 0..8 {
                    va.push(fa.px[(wy * 8 + y) * fa.w + wx * 8 + x]);
                    vb.push(fb.px[(wy * 8 + y) * fb.w + wx * 8 + x]);
                }
            }
            let (la, lb) = (levels(&va), levels(&vb));
            let mut ma = vec![0; 4];
            let mut mb = vec![0; 4];
            let mut joint = vec![0; 16];
            for i in 0..64 {
                ma[la[i]] += 1;
                mb[lb[i]] += 1;
                joint[la[i] * 4 + lb[i]] += 1;
            }
            let (ha, hb, hj) = (entropy(&ma, 64), entropy(&mb, 64), entropy(&joint, 64));
            if ha + hb == 0.0 {
                continue;
            }
            total += 2.0 * (ha + hb - hj) / (ha + hb);
            used += 1;
        }
    }
    (used > 0).then(|| total / used as f64)
}

pub fn en(img: &Img) -> f64 {
    let mut counts = vec![0; 256];
    for &v in &img.px {
        counts[((v * 256.0).floor() as usize).min(255)] += 1;
    }
    entropy(&counts, img.px.len())
}

pub fn sd(img: &Img) -> f64 {
    let n = img.px.len() as f64;
    let m = img.px.iter().sum::<f64>() / n;
    (img.px.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn ei(img: &Img) -> f64 {
    let (gx, gy) = sobel(img);
    gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).sum::<f64>() / img.px.len() as f64
}

pub fn sf(img: &Img) -> f64 {
    let (mut rf, mut cf) = (0.0, 0.0);
    for y in 0..img.h {
        for x in 1..img.w {
            rf += (img.px[y * img.w + x] - img.px[y * img.w + x - 1]).powi(2);
        }
    }
    for y in 1..img.h {
        for x in 0..img.w {
            cf += (img.px[y * img.w + x] - img.px[(y - 1) * img.w + x]).powi(2);
        }
    }
    let rf = rf / (img.h * (img.w - 1)) as f64;
    let cf = cf / ((img.h - 1) * img.w) as f64;
    (rf + cf).sqrt()
}
