//! File formats and synthetic data.

pub mod dataset;
mod lines;
pub mod predictions;
pub mod raster;
pub mod synth;
