use fusemetrics::transform::{block_dct8, haar_dwt1, histogram256, sobel};
use fusemetrics::{GrayImage, Plane};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(seed: u64, w: usize, h: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(w, h, |_, _| rng.random::<f64>())
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dct_preserves_energy(seed in any::<u64>(), bw in 1usize..5, bh in 1usize..5) {
        let img = noise(seed, bw * 8, bh * 8);
        let d = block_dct8(&img);
        let coeff: f64 = d.blocks.iter().map(|b| energy(b)).sum();
        let pix = energy(img.data());
        prop_assert!(((coeff - pix) / pix).abs() < 1e-6);
    }

    #[test]
    fn haar_preserves_energy(seed in any::<u64>(), hw in 2usize..20, hh in 2usize..20) {
        let img = noise(seed, hw * 2, hh * 2);
        let b = haar_dwt1(&img);
        let e = energy(&b.ll.data) + energy(&b.lh.data) + energy(&b.hl.data) + energy(&b.hh.data);
        let pix = energy(img.data());
        prop_assert!(((e - pix) / pix).abs() < 1e-6);
    }

    #[test]
    fn sobel_magnitude_commutes_with_transpose(seed in any::<u64>(), w in 3usize..24, h in 3usize..24) {
        let img = noise(seed, w, h);
        let g = sobel(&img).unwrap();
        let gt = sobel(&img.transpose()).unwrap();
        for y in 0..h {
            for x in 0..w {
                prop_assert!((g.magnitude.at(x, y) - gt.magnitude.at(y, x)).abs() < 1e-12);
                prop_assert!((g.gx.at(x, y) - gt.gy.at(y, x)).abs() < 1e-12);
                prop_assert!((g.gy.at(x, y) - gt.gx.at(y, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transforms_are_bit_deterministic(seed in any::<u64>()) {
        let img = noise(seed, 21, 13);
        prop_assert_eq!(sobel(&img).unwrap().magnitude, sobel(&img).unwrap().magnitude);
        prop_assert_eq!(haar_dwt1(&img).hh, haar_dwt1(&img).hh);
        prop_assert_eq!(block_dct8(&img).blocks, block_dct8(&img).blocks);
    }
}

#[test]
fn histogram_totals_match_pixel_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let img = noise(i, w, h);
        let hist = histogram256(&img);
        assert_eq!(hist.total, (w * h) as u64);
        assert_eq!(hist.counts.iter().sum::<u64>(), hist.total);
    }
}
