//! Shared signal-processing transforms consumed by the metric kernels.
//!
//! All functions are pure; identical input yields bit-identical output.

pub mod dct;
pub mod filter;
pub mod gradient;
pub mod haar;
pub mod histogram;
pub mod pyramid;

pub use dct::{block_dct8, BlockDct};
pub use gradient::{sobel, GradientField};
pub use haar::{haar_dwt1, haar_idwt1, HaarBands};
pub use histogram::{histogram256, Histogram256};
pub use pyramid::gaussian_pyramid;
