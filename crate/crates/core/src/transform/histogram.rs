use crate::image::Plane;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram256 {
    pub counts: [u64; 256],
    pub total: u64,
}

#[inline]
pub fn bin256(v: f64) -> usize {
    ((v * 256.0) as usize).min(255)
}

/// Bin rule `min(floor(v * 256), 255)`.
pub fn histogram256<P: Plane + ?Sized>(img: &P) -> Histogram256 {
    let mut counts = [0u64; 256];
    for &v in img.data() {
        counts[bin256(v)] += 1;
    }
    Histogram256 {
        counts,
        total: img.len() as u64,
    }
}

impl Histogram256 {
    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        let n = self.total as f64;
        self.counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;

    #[test]
    fn constant_zero_fills_first_bin() {
        let h = histogram256(&GrayImage::zeros(10, 10));
        assert_eq!(h.counts[0], 100);
        assert_eq!(h.counts[1..].iter().sum::<u64>(), 0);
        assert_eq!(h.total, 100);
    }

    #[test]
    fn one_clamps_into_last_bin() {
        assert_eq!(bin256(1.0), 255);
        assert_eq!(bin256(0.999), 255);
        assert_eq!(bin256(0.0), 0);
    }

    #[test]
    fn all_levels_once() {
        let img = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as f64 / 255.0);
        let h = histogram256(&img);
        assert!(h.counts.iter().all(|&c| c == 1));
        assert!((h.entropy() - 8.0).abs() < 1e-12);
    }
}
