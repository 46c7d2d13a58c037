//! Stage II: reject text-free frames and crop the text foreground.
//!
//! Edges are found per YUV channel, OR-merged, closed, and projected onto both
//! axes. The local maxima of the two projections decide rejection and give the
//! crop bounds. Histogram `y` positions count rows from the bottom of the
//! frame; [`CropRect::to_pixel_rect`] converts back to top-left pixel rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{canny, morph_close, rgb_to_yuv, BinaryImage, CannyThresholds, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    /// A frame needs more than `theta` peaks on each axis.
    pub theta: usize,
    /// Minimum mean peak height as a fraction of the perpendicular dimension.
    pub alpha: f64,
    pub canny: CannyThresholds,
    pub close_w: usize,
    pub close_h: usize,
    /// Peak count (on both axes) from which a frame counts as cluttered and is kept uncropped.
    pub busy_threshold: usize,
    pub margin_px: usize,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            theta: 3,
            alpha: 0.02,
            canny: CannyThresholds::default(),
            close_w: 9,
            close_h: 3,
            busy_threshold: 40,
            margin_px: 32,
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta < 1 {
            return Err(Error::Config("screen.theta must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("screen.alpha must lie in (0, 1)".into()));
        }
        if self.busy_threshold <= self.theta {
            return Err(Error::Config("screen.busy_threshold must exceed screen.theta".into()));
        }
        if self.close_w < 1 || self.close_h < 1 {
            return Err(Error::Config("screen.close_w and screen.close_h must be >= 1".into()));
        }
        CannyThresholds::new(self.canny.low, self.canny.high).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Inclusive crop bounds with `y` counted from the bottom row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x_l: usize,
    pub y_b: usize,
    pub x_r: usize,
    pub y_t: usize,
}

/// Top-left-origin pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    pub fn to_pixel_rect(&self, frame_height: usize) -> PixelRect {
        PixelRect {
            x: self.x_l,
            y: frame_height - 1 - self.y_t,
            width: self.x_r - self.x_l + 1,
            height: self.y_t - self.y_b + 1,
        }
    }
}

impl PixelRect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Reject,
    AcceptWhole,
    AcceptCrop { rect: CropRect },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakEvidence {
    pub peaks_x: Vec<usize>,
    pub peaks_y: Vec<usize>,
    pub mean_x: f64,
    pub mean_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenDecision {
    pub verdict: Verdict,
    pub evidence: PeakEvidence,
}

impl ScreenDecision {
    pub fn is_reject(&self) -> bool {
        matches!(self.verdict, Verdict::Reject)
    }
}

/// Canny on Y, U and V independently, merged by pixelwise OR.
pub fn edge_map_yuv(frame: &Frame, cfg: &ScreenConfig) -> Result<BinaryImage> {
    let [y, u, v] = rgb_to_yuv(frame)?;
    let ey = canny(&y, cfg.canny)?;
    let eu = canny(&u, cfg.canny)?;
    let ev = canny(&v, cfg.canny)?;
    ey.or(&eu)?.or(&ev)
}

/// Closed edge map `I_c`.
pub fn closed_edge_map(frame: &Frame, cfg: &ScreenConfig) -> Result<BinaryImage> {
    Ok(morph_close(&edge_map_yuv(frame, cfg)?, cfg.close_w, cfg.close_h))
}

/// Column sums `H_x` (left to right) and row sums `H_y` (bottom to top).
pub fn axis_histograms(img: &BinaryImage) -> (Vec<u32>, Vec<u32>) {
    let (w, h) = (img.width, img.height);
    let mut hx = vec![0u32; w];
    let mut hy = vec![0u32; h];
    for row in 0..h {
        let line = &img.data[row * w..(row + 1) * w];
        let mut sum = 0u32;
        for (x, &v) in line.iter().enumerate() {
            hx[x] += v as u32;
            sum += v as u32;
        }
        hy[h - 1 - row] = sum;
    }
    (hx, hy)
}

/// Interior local maxima. A plateau bounded by strictly smaller values on both
/// sides counts once, at its first index.
pub fn find_peaks(hist: &[u32]) -> Vec<usize> {
    let n = hist.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if hist[i] > hist[i - 1] {
            let mut end = i;
            while end + 1 < n && hist[end + 1] == hist[i] {
                end += 1;
            }
            if end + 1 < n && hist[end + 1] < hist[i] {
                peaks.push(i);
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn mean_at(hist: &[u32], peaks: &[usize]) -> f64 {
    if peaks.is_empty() {
        return 0.0;
    }
    peaks.iter().map(|&p| hist[p] as f64).sum::<f64>() / peaks.len() as f64
}

/// Decision on an already closed edge map.
pub fn screen_closed(closed: &BinaryImage, cfg: &ScreenConfig) -> ScreenDecision {
    let (w, h) = (closed.width, closed.height);
    let (hx, hy) = axis_histograms(closed);
    let peaks_x = find_peaks(&hx);
    let peaks_y = find_peaks(&hy);
    let mean_x = mean_at(&hx, &peaks_x);
    let mean_y = mean_at(&hy, &peaks_y);

    let reject = peaks_x.len() <= cfg.theta
        || peaks_y.len() <= cfg.theta
        || mean_x <= cfg.alpha * h as f64
        || mean_y <= cfg.alpha * w as f64;

    let verdict = if reject {
        Verdict::Reject
    } else if peaks_x.len() >= cfg.busy_threshold && peaks_y.len() >= cfg.busy_threshold {
        Verdict::AcceptWhole
    } else {
        let (xf, xl) = (peaks_x[0], peaks_x[peaks_x.len() - 1]);
        let (yf, yl) = (peaks_y[0], peaks_y[peaks_y.len() - 1]);
        if xf == xl || yf == yl {
            Verdict::AcceptWhole
        } else {
            let m = cfg.margin_px;
            Verdict::AcceptCrop {
                rect: CropRect {
                    x_l: xf.saturating_sub(m),
                    y_b: yf.saturating_sub(m),
                    x_r: (xl + m).min(w - 1),
                    y_t: (yl + m).min(h - 1),
                },
            }
        }
    };
    ScreenDecision { verdict, evidence: PeakEvidence { peaks_x, peaks_y, mean_x, mean_y } }
}

/// Full Stage II on an RGB frame.
pub fn screen_frame(frame: &Frame, cfg: &ScreenConfig) -> Result<ScreenDecision> {
    Ok(screen_closed(&closed_edge_map(frame, cfg)?, cfg))
}
