//! Flat raster images and their sidecar file format.
//!
//! Sidecar layout (little endian):
//!
//! ```text
//! offset 0   4 bytes   magic "HRAS"
//! offset 4   u32       version (1)
//! offset 8   u32       channels
//! offset 12  u32       height
//! offset 16  u32       width
//! offset 20  u8 * C*H*W  samples, channel-major then row-major
//! ```
//!
//! Samples map to intensities `v / 255`.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HRAS";
const VERSION: u32 = 1;

/// A `channels x height x width` image with 8-bit samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0; channels * height * width],
        }
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> u8 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: u8) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Pixel features as a `(height * width, channels)` matrix in `[0, 1]`.
    pub fn to_tokens(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.height * self.width, self.channels), |(p, c)| {
            let (y, x) = (p / self.width, p % self.width);
            f64::from(self.get(c, y, x)) / 255.0
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.channels as u32, self.height as u32, self.width as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 20];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("not a raster sidecar".into()));
        }
        let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap()) as usize;
        if word(4) != VERSION as usize {
            return Err(Error::Format(format!("unsupported raster version {}", word(4))));
        }
        let mut img = Image::new(word(8), word(12), word(16));
        r.read_exact(&mut img.data)?;
        Ok(img)
    }
}
