//! Every metric kernel against its from-definition oracle, plus metric-level
//! properties (symmetry, range, monotone degradation).

mod support;

use fusemetrics::metrics::{self, FmiFeature, MetricId};
use fusemetrics::transform::filter::{separable_same, BINOMIAL5};
use fusemetrics::{GrayImage, Plane};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles::{self, Feature, Img};

fn to_img(g: &GrayImage) -> Img {
    Img::new(g.width(), g.height(), g.data().to_vec())
}

/// Correlated pair: a smoothed random field and a noisy, partially mixed copy.
fn random_pair(seed: u64, w: usize, h: usize) -> (GrayImage, GrayImage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = GrayImage::from_fn(w, h, |_, _| rng.random::<f64>());
    let a = GrayImage::from_raster_clamped(&separable_same(&raw, &BINOMIAL5, &BINOMIAL5));
    let mix: f64 = rng.random_range(0.2..0.9);
    let amp: f64 = rng.random_range(0.0..0.2);
    let other = GrayImage::from_fn(w, h, |_, _| rng.random::<f64>());
    let b = GrayImage::from_fn(w, h, |x, y| {
        mix * a.at(x, y) + (1.0 - mix) * other.at(x, y) + amp * (rng.random::<f64>() - 0.5)
    });
    (a, b)
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

#[test]
fn exact_formula_metrics_match_oracles_on_random_pairs() {
    for seed in 0..50 {
        let (a, b) = random_pair(seed, 32, 32);
        let (f, _) = random_pair(seed + 1000, 32, 32);
        let (oa, ob, of) = (to_img(&a), to_img(&b), to_img(&f));
        let check = |name: &str, got: f64, want: f64| {
            assert!(close(got, want, 1e-9), "seed {seed} {name}: {got} vs {want}");
        };
        check("PSNR", metrics::psnr(&a, &b).unwrap().value, oracles::psnr(&oa, &ob));
        check("CC", metrics::cc(&a, &b).unwrap().value, oracles::cc(&oa, &ob));
        check("SSIM", metrics::ssim(&a, &b).unwrap().value, oracles::ssim(&oa, &ob));
        check("QABF", metrics::qabf(&a, &b, &f).unwrap().value, oracles::qabf(&oa, &ob, &of));
        check("QABF2", metrics::qabf_pairwise(&a, &b).unwrap().value, oracles::qabf_pairwise(&oa, &ob));
        for (feat, ofeat) in [
            (FmiFeature::Pixel, Feature::Pixel),
            (FmiFeature::Dct, Feature::Dct),
            (FmiFeature::Wavelet, Feature::Wavelet),
        ] {
            let got = metrics::fmi(&a, &b, feat).unwrap().value;
            check(&format!("FMI {feat:?}"), got, oracles::fmi(&oa, &ob, ofeat).unwrap());
        }
        check("EN", metrics::en(&b), oracles::en(&ob));
        check("SD", metrics::sd(&b), oracles::sd(&ob));
        check("EI", metrics::ei(&b).unwrap(), oracles::ei(&ob));
        check("SF", metrics::sf(&b), oracles::sf(&ob));
    }
}

#[test]
fn vif_matches_oracle_within_relative_tolerance() {
    for seed in 0..50 {
        let (a, b) = random_pair(seed, 32, 32);
        let got = metrics::vif(&a, &b).unwrap().value;
        let want = oracles::vif(&to_img(&a), &to_img(&b));
        assert!(((got - want) / want).abs() < 1e-4, "seed {seed}: {got} vs {want}");
    }
    // full four-scale path on a textured 64x64 pair
    let x = GrayImage::from_fn(64, 64, |x, y| {
        0.5 + 0.3 * ((x as f64 * 0.37).sin() * (y as f64 * 0.23).cos()) + 0.1 * ((x * y) % 7) as f64 / 7.0
    });
    let blurred = GrayImage::from_raster_clamped(&separable_same(&x, &BINOMIAL5, &BINOMIAL5));
    let got = metrics::vif(&x, &blurred).unwrap().value;
    let want = oracles::vif(&to_img(&x), &to_img(&blurred));
    assert!(((got - want) / want).abs() < 1e-4, "{got} vs {want}");
    assert!(got < 1.0);
}

#[test]
fn psnr_strictly_decreases_with_noise_amplitude() {
    let (x, _) = random_pair(7, 48, 48);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pattern: Vec<f64> = (0..48 * 48).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut last = f64::INFINITY;
    for amp in [0.01, 0.02, 0.05, 0.1, 0.2] {
        let noisy = GrayImage::from_fn(48, 48, |px, py| x.at(px, py) + amp * pattern[py * 48 + px]);
        let p = metrics::psnr(&x, &noisy).unwrap().value;
        assert!(p < last, "amp {amp}: {p} !< {last}");
        last = p;
    }
}

fn arb_pair() -> impl Strategy<Value = (GrayImage, GrayImage)> {
    (any::<u64>(), 16usize..40, 16usize..40).prop_map(|(seed, w, h)| random_pair(seed, w, h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn symmetric_metrics((a, b) in arb_pair()) {
        for m in [MetricId::Cc, MetricId::Ssim, MetricId::FmiP, MetricId::FmiDct, MetricId::FmiW] {
            let ab = metrics::pairwise(m, &a, &b).unwrap().value;
            let ba = metrics::pairwise(m, &b, &a).unwrap().value;
            prop_assert!((ab - ba).abs() < 1e-9, "{m}: {ab} vs {ba}");
        }
    }

    #[test]
    fn metric_ranges((a, b) in arb_pair()) {
        let slack = 1e-9;
        let ssim = metrics::ssim(&a, &b).unwrap().value;
        prop_assert!(ssim <= 1.0 + slack && ssim >= -1.0 - slack);
        let cc = metrics::cc(&a, &b).unwrap().value;
        prop_assert!((-1.0..=1.0).contains(&cc));
        let q = metrics::qabf_pairwise(&a, &b).unwrap().value;
        prop_assert!((-slack..=1.0 + slack).contains(&q));
        for f in [FmiFeature::Pixel, FmiFeature::Dct, FmiFeature::Wavelet] {
            let v = metrics::fmi(&a, &b, f).unwrap().value;
            prop_assert!((-slack..=1.0 + slack).contains(&v), "{f:?} {v}");
        }
        prop_assert!(metrics::vif(&a, &b).unwrap().value >= 0.0);
        let en = metrics::en(&a);
        prop_assert!((0.0..=8.0).contains(&en));
    }
}
