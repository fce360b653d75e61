use crate::error::Result;
use crate::image::{check_min_dims, check_same_dims, GrayImage, Plane};
use crate::metrics::Score;
use crate::transform::filter::{gaussian_kernel, separable_valid};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// `(K1 * L)^2` with `K1 = 0.01`, `L = 1`.
pub const SSIM_C1: f64 = 0.01 * 0.01;
/// `(K2 * L)^2` with `K2 = 0.03`, `L = 1`.
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean SSIM over every fully contained 11x11 Gaussian window.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<Score> {
    check_same_dims(a, b)?;
    check_min_dims(a, SSIM_WINDOW, SSIM_WINDOW)?;
    let (w, h) = (a.width(), a.height());
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);

    let (da, db) = (a.data(), b.data());
    let aa: Vec<f64> = da.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = db.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = da.iter().zip(db).map(|(x, y)| x * y).collect();

    let mu_a = separable_valid(da, w, h, &k, &k);
    let mu_b = separable_valid(db, w, h, &k, &k);
    let e_aa = separable_valid(&aa, w, h, &k, &k);
    let e_bb = separable_valid(&bb, w, h, &k, &k);
    let e_ab = separable_valid(&ab, w, h, &k, &k);

    let n = mu_a.data.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
        let va = e_aa.data[i] - ma * ma;
        let vb = e_bb.data[i] - mb * mb;
        let cov = e_ab.data[i] - ma * mb;
        total += ssim_term(ma, mb, va, vb, cov);
    }
    Ok(Score::ok(total / n as f64))
}

#[inline]
pub(crate) fn ssim_term(ma: f64, mb: f64, va: f64, vb: f64, cov: f64) -> f64 {
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}
