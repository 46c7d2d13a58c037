//! Canny edge detection: 5x5 Gaussian (sigma 1.4), Sobel gradients,
//! four-direction non-maximum suppression and hysteresis.
//!
//! Smoothing and gradients run in exact integer arithmetic (the classic
//! 1/159 kernel), so adding a constant to the input never changes the output.

use std::collections::VecDeque;

use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

const GAUSS_5X5: [[i32; 5]; 5] = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
];
const GAUSS_SUM: f64 = 159.0;

/// Hysteresis thresholds on the Sobel gradient magnitude of the smoothed image.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CannyThresholds {
    pub low: f64,
    pub high: f64,
}

impl CannyThresholds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low >= 0.0 && low <= high) {
            return Err(Error::InvalidArgument(format!("canny thresholds low={low} high={high}")));
        }
        Ok(Self { low, high })
    }
}

impl Default for CannyThresholds {
    fn default() -> Self {
        Self { low: 40.0, high: 100.0 }
    }
}

#[inline]
fn clamp_idx(v: isize, n: usize) -> usize {
    v.clamp(0, n as isize - 1) as usize
}

/// Smoothed image scaled by 159 (exact integers).
fn smooth_scaled(img: &GrayImage) -> Vec<i32> {
    let (w, h) = (img.width, img.height);
    let mut out = vec![0i32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0i32;
            for (ky, krow) in GAUSS_5X5.iter().enumerate() {
                let sy = clamp_idx(y as isize + ky as isize - 2, h);
                for (kx, &c) in krow.iter().enumerate() {
                    let sx = clamp_idx(x as isize + kx as isize - 2, w);
                    acc += c * img.data[sy * w + sx] as i32;
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Sobel gradients of a scaled integer image, replicate border.
fn sobel(s: &[i32], w: usize, h: usize) -> (Vec<i32>, Vec<i32>) {
    let at = |x: isize, y: isize| s[clamp_idx(y, h) * w + clamp_idx(x, w)];
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Canny edge map; 1 marks an edge pixel.
pub fn canny(img: &GrayImage, thresholds: CannyThresholds) -> Result<BinaryImage> {
    let CannyThresholds { low, high } = CannyThresholds::new(thresholds.low, thresholds.high)?;
    let (w, h) = (img.width, img.height);
    let smoothed = smooth_scaled(img);
    let (gx, gy) = sobel(&smoothed, w, h);
    let mag: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| ((a as f64).powi(2) + (b as f64).powi(2)).sqrt() / GAUSS_SUM)
        .collect();

    // tan(22.5 deg)
    const TAN_22_5: f64 = 0.414_213_562_373_095_1;
    let mag_at = |x: isize, y: isize| mag[clamp_idx(y, h) * w + clamp_idx(x, w)];
    let mut strength = vec![0u8; w * h]; // 0 none, 1 weak, 2 strong
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m < low || m == 0.0 {
                continue;
            }
            let (ax, ay) = ((gx[i] as f64).abs(), (gy[i] as f64).abs());
            // Neighbour offsets along the gradient direction.
            let (dx, dy): (isize, isize) = if ay <= ax * TAN_22_5 {
                (1, 0)
            } else if ax <= ay * TAN_22_5 {
                (0, 1)
            } else if (gx[i] > 0) == (gy[i] > 0) {
                (1, 1)
            } else {
                (1, -1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let before = mag_at(xi - dx, yi - dy);
            let after = mag_at(xi + dx, yi + dy);
            // Asymmetric comparison keeps exactly one pixel of a symmetric ridge.
            if m >= before && m > after {
                strength[i] = if m >= high { 2 } else { 1 };
            }
        }
    }

    let mut out = BinaryImage::new(w, h);
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &s) in strength.iter().enumerate() {
        if s == 2 {
            out.data[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if strength[j] == 1 && out.data[j] == 0 {
                    out.data[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(out)
}

/// Separable Gaussian blur with replicate border; radius is `ceil(3 sigma)`.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);

    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * img.data[y * w + clamp_idx(x as isize + k as isize - radius, w)] as f64)
                .sum();
        }
    }
    let mut out = GrayImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let v: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[clamp_idx(y as isize + k as isize - radius, h) * w + x])
                .sum();
            out.data[y * w + x] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}
