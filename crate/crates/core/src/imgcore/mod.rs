//! Raster primitives shared by every stage.
//!
//! All functions here are pure and operate on immutable inputs.

mod canny;
mod color;
mod convolve;
mod fft;
mod morph;
mod resize;

pub use canny::{canny, gaussian_blur, CannyThresholds};
pub use color::{rgb_to_yuv, to_grayscale, yuv_to_rgb};
pub use convolve::{convolve2d, Kernel};
pub use fft::{dft2_magnitude, fft_in_place};
pub use morph::{dilate, erode, morph_close};
pub use resize::{resize_bilinear, thumbnail};

use crate::error::{Error, Result};

/// A decoded video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Position in the original sequence.
    pub index: usize,
    /// Presentation time in seconds.
    pub timestamp: f64,
    pub width: usize,
    pub height: usize,
    /// 1 (gray) or 3 (RGB).
    pub channels: u8,
    /// Row-major interleaved samples.
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(index: usize, width: usize, height: usize, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("empty frame {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!("unsupported channel count {channels}")));
        }
        let expected = width * height * channels as usize;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: pixels.len() });
        }
        Ok(Self { index, timestamp: 0.0, width, height, channels, pixels })
    }

    pub fn from_rgb(index: usize, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::new(index, width, height, 3, pixels)
    }

    pub fn from_gray(index: usize, img: GrayImage) -> Self {
        Self { index, timestamp: 0.0, width: img.width, height: img.height, channels: 1, pixels: img.data }
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn byte_len(&self) -> usize {
        self.pixels.len()
    }

    /// Expands a gray frame to three identical channels; RGB frames are cloned.
    pub fn to_rgb(&self) -> Frame {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&g| [g, g, g]).collect();
        Frame { channels: 3, pixels, ..self.clone() }
    }

    /// Copies the `w`x`h` region with top-left corner (`x`, `y`).
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Frame> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels as usize;
        let mut pixels = Vec::with_capacity(w * h * c);
        for row in y..y + h {
            let start = (row * self.width + x) * c;
            pixels.extend_from_slice(&self.pixels[start..start + w * c]);
        }
        Ok(Frame { width: w, height: h, pixels, ..self.clone() })
    }
}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Binary image with samples exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Pixelwise OR; both images must share dimensions.
    pub fn or(&self, other: &BinaryImage) -> Result<BinaryImage> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: self.width * self.height,
                actual: other.width * other.height,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a | b).collect();
        Ok(BinaryImage { width: self.width, height: self.height, data })
    }
}

/// Real-valued single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RealImage {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}
