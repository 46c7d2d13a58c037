use super::{Frame, GrayImage};
use crate::error::{Error, Result};

#[inline]
fn clamp_round(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 luma. Gray frames pass through unchanged.
pub fn to_grayscale(frame: &Frame) -> GrayImage {
    if frame.channels == 1 {
        return GrayImage { width: frame.width, height: frame.height, data: frame.pixels.clone() };
    }
    let data = frame
        .pixels
        .chunks_exact(3)
        .map(|p| clamp_round(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect();
    GrayImage { width: frame.width, height: frame.height, data }
}

/// Full-range BT.601 YUV with chroma offset by 128.
pub fn rgb_to_yuv(frame: &Frame) -> Result<[GrayImage; 3]> {
    if frame.channels != 3 {
        return Err(Error::ChannelMismatch { expected: 3, actual: frame.channels });
    }
    let n = frame.width * frame.height;
    let (mut y, mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in frame.pixels.chunks_exact(3) {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        y.push(clamp_round(0.299 * r + 0.587 * g + 0.114 * b));
        u.push(clamp_round(-0.168736 * r - 0.331264 * g + 0.5 * b + 128.0));
        v.push(clamp_round(0.5 * r - 0.418688 * g - 0.081312 * b + 128.0));
    }
    let (w, h) = (frame.width, frame.height);
    Ok([
        GrayImage { width: w, height: h, data: y },
        GrayImage { width: w, height: h, data: u },
        GrayImage { width: w, height: h, data: v },
    ])
}

/// Inverse of [`rgb_to_yuv`] for a single sample.
pub fn yuv_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let (y, u, v) = (y as f64, u as f64 - 128.0, v as f64 - 128.0);
    [
        clamp_round(y + 1.402 * v),
        clamp_round(y - 0.344136 * u - 0.714136 * v),
        clamp_round(y + 1.772 * u),
    ]
}
