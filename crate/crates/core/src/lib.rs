//! Evaluation engine for infrared/visible image fusion.

pub mod consistency;
pub mod dataset;
pub mod decomposition;
pub mod environment;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod surrogate;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
pub use image::{GrayImage, Plane, Raster};
