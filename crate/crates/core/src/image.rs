//! Pixel containers.
//!
//! [`GrayImage`] holds normalized intensities in `[0, 1]` and is the unit every
//! metric consumes. [`Raster`] is the unconstrained real-valued counterpart used
//! for filter responses, gradients and transform coefficients.

use crate::error::{Error, Result};

/// Read access shared by [`GrayImage`] and [`Raster`].
pub trait Plane {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn data(&self) -> &[f64];

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data()[y * self.width() + x]
    }

    /// Edge-replicated access for out-of-range coordinates.
    #[inline]
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width() as isize - 1) as usize;
        let cy = y.clamp(0, self.height() as isize - 1) as usize;
        self.at(cx, cy)
    }

    fn len(&self) -> usize {
        self.data().len()
    }

    fn is_empty(&self) -> bool {
        self.data().is_empty()
    }

    fn mean(&self) -> f64 {
        self.data().iter().sum::<f64>() / self.len() as f64
    }

    fn same_dims<P: Plane + ?Sized>(&self, other: &P) -> bool {
        self.width() == other.width() && self.height() == other.height()
    }
}

pub(crate) fn check_same_dims<A: Plane + ?Sized, B: Plane + ?Sized>(a: &A, b: &B) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::DimMismatch(a.width(), a.height(), b.width(), b.height()))
    }
}

pub(crate) fn check_min_dims<P: Plane + ?Sized>(p: &P, min_w: usize, min_h: usize) -> Result<()> {
    if p.width() < min_w || p.height() < min_h {
        Err(Error::too_small(p.width(), p.height(), min_w, min_h))
    } else {
        Ok(())
    }
}

/// Single-channel image, row-major, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage(format!(
                "pixel {i} = {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Caller guarantees every value is finite and in `[0, 1]`.
    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds an image from a generator, clamping into `[0, 1]` (NaN maps to 0).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "zero-sized image");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0)
    }

    /// Clamps a raster into `[0, 1]`.
    pub fn from_raster_clamped(r: &Raster) -> Self {
        Self {
            width: r.width,
            height: r.height,
            data: r.data.iter().map(|&v| clamp_unit(v)).collect(),
        }
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.at(x, y));
            }
        }
        Self {
            width: self.height,
            height: self.width,
            data,
        }
    }

    /// Applies `f` per pixel, clamping the result into `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| clamp_unit(f(v))).collect(),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Nonzero-preserving 8-bit quantization, `round(v * 255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round() as u8).collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} bytes, got {}",
                width * height,
                bytes.len()
            )));
        }
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

impl Plane for GrayImage {
    #[inline]
    fn width(&self) -> usize {
        self.width
    }
    #[inline]
    fn height(&self) -> usize {
        self.height
    }
    #[inline]
    fn data(&self) -> &[f64] {
        &self.data
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Real-valued raster without a range constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

impl Plane for Raster {
    #[inline]
    fn width(&self) -> usize {
        self.width
    }
    #[inline]
    fn height(&self) -> usize {
        self.height
    }
    #[inline]
    fn data(&self) -> &[f64] {
        &self.data
    }
}
