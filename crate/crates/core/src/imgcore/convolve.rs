use super::{GrayImage, RealImage};
use crate::error::{Error, Result};

/// Odd-sized real convolution kernel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    coeffs: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, coeffs: Vec<f64>) -> Result<Self> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(Error::EvenKernel { width, height });
        }
        if coeffs.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: coeffs.len() });
        }
        Ok(Self { width, height, coeffs })
    }

    pub fn identity() -> Self {
        Self { width: 1, height: 1, coeffs: vec![1.0] }
    }

    /// 4-neighbour Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]`.
    pub fn laplacian() -> Self {
        Self { width: 3, height: 3, coeffs: vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Correlation with replicate border padding. Output has the input's size and is not clamped.
pub fn convolve2d(img: &GrayImage, k: &Kernel) -> RealImage {
    let (w, h) = (img.width as isize, img.height as isize);
    let (rx, ry) = ((k.width / 2) as isize, (k.height / 2) as isize);
    let taps: Vec<(isize, isize, f64)> = (0..k.height)
        .flat_map(|ky| (0..k.width).map(move |kx| (kx, ky)))
        .filter_map(|(kx, ky)| {
            let c = k.coeffs[ky * k.width + kx];
            (c != 0.0).then_some((kx as isize - rx, ky as isize - ry, c))
        })
        .collect();
    let mut out = vec![0.0; img.data.len()];
    for y in 0..h {
        let interior_y = y >= ry && y < h - ry;
        for x in 0..w {
            let mut acc = 0.0;
            if interior_y && x >= rx && x < w - rx {
                let base = y * w + x;
                for &(dx, dy, c) in &taps {
                    acc += c * img.data[(base + dy * w + dx) as usize] as f64;
                }
            } else {
                for &(dx, dy, c) in &taps {
                    let sx = (x + dx).clamp(0, w - 1);
                    let sy = (y + dy).clamp(0, h - 1);
                    acc += c * img.data[(sy * w + sx) as usize] as f64;
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    RealImage { width: img.width, height: img.height, data: out }
}
