//! Stage I: sub-sample the sequence, cut it into windows and keep the
//! sharpest frame of each window.
//!
//! Frames are scored by two sharpness measures, the variance of the Laplacian
//! response and the mean 2-D DFT magnitude, and the per-window ranks of both
//! are fused with weight `lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{dft2_magnitude, thumbnail, to_grayscale, Frame, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub window_size: usize,
    pub subsample_rate: usize,
    /// Weight of the DFT rank; the Laplacian rank gets `1 - lambda`.
    pub lambda: f64,
    /// Longest side of the analysis thumbnail.
    pub analysis_max_side: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self { window_size: 8, subsample_rate: 2, lambda: 0.5, analysis_max_side: 256 }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 1 {
            return Err(Error::Config("quality.window_size must be >= 1".into()));
        }
        if self.subsample_rate < 1 {
            return Err(Error::Config("quality.subsample_rate must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("quality.lambda must lie in [0, 1]".into()));
        }
        if self.analysis_max_side < 16 {
            return Err(Error::Config("quality.analysis_max_side must be >= 16".into()));
        }
        Ok(())
    }
}

/// Keeps positions 0, r, 2r, ... of `indices`.
pub fn subsample(indices: &[usize], rate: usize) -> Vec<usize> {
    indices.iter().step_by(rate.max(1)).copied().collect()
}

/// Consecutive non-overlapping windows of `size`; a trailing partial window is kept.
pub fn sliding_windows(indices: &[usize], size: usize) -> Vec<Vec<usize>> {
    indices.chunks(size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Population variance of the 4-neighbour Laplacian response, borders clamped.
/// The response is integral, so the sums are exact.
pub fn laplacian_variance(img: &GrayImage) -> f64 {
    let (w, h) = (img.width, img.height);
    let (mut sum, mut sumsq) = (0i64, 0i128);
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        let up = &img.data[y.saturating_sub(1) * w..][..w];
        let down = &img.data[(y + 1).min(h - 1) * w..][..w];
        for x in 0..w {
            let left = row[x.saturating_sub(1)] as i32;
            let right = row[(x + 1).min(w - 1)] as i32;
            let r = up[x] as i32 + down[x] as i32 + left + right - 4 * row[x] as i32;
            sum += r as i64;
            sumsq += (r * r) as i128;
        }
    }
    let n = (w * h) as i128;
    ((n * sumsq - sum as i128 * sum as i128) as f64) / (n * n) as f64
}

/// Sum of DFT magnitudes divided by the pixel count, computed on a thumbnail
/// whose longest side is at most `max_side`.
pub fn fft_mean_magnitude(img: &GrayImage, max_side: usize) -> f64 {
    let small = thumbnail(img, max_side);
    let spectrum = dft2_magnitude(&small);
    spectrum.data.iter().sum::<f64>() / (small.width * small.height) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub fft: f64,
    pub laplacian_var: f64,
}

/// Scores one frame on its luma thumbnail.
pub fn score_frame(frame: &Frame, cfg: &QualityConfig) -> FrameScores {
    let small = thumbnail(&to_grayscale(frame), cfg.analysis_max_side);
    FrameScores { fft: fft_mean_magnitude(&small, cfg.analysis_max_side), laplacian_var: laplacian_variance(&small) }
}

/// Ascending ranks starting at 1; equal scores give the earlier entry the lower rank.
pub fn rank_in_window(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSelection {
    pub window_id: usize,
    /// Frame indices in temporal order.
    pub members: Vec<usize>,
    pub scores: Vec<FrameScores>,
    pub fft_ranks: Vec<usize>,
    pub laplacian_ranks: Vec<usize>,
    pub selected: usize,
}

/// Picks the member maximizing `lambda * rank_fft + (1 - lambda) * rank_lv`;
/// ties go to the earliest member.
pub fn select_highest_quality(
    window_id: usize,
    members: &[usize],
    scores: &[FrameScores],
    lambda: f64,
) -> Result<WindowSelection> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    if members.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: members.len(), actual: scores.len() });
    }
    let fft_ranks = rank_in_window(&scores.iter().map(|s| s.fft).collect::<Vec<_>>());
    let laplacian_ranks = rank_in_window(&scores.iter().map(|s| s.laplacian_var).collect::<Vec<_>>());

    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..members.len() {
        let fused = lambda * fft_ranks[i] as f64 + (1.0 - lambda) * laplacian_ranks[i] as f64;
        if fused > best_score {
            best = i;
            best_score = fused;
        }
    }
    Ok(WindowSelection {
        window_id,
        members: members.to_vec(),
        scores: scores.to_vec(),
        fft_ranks,
        laplacian_ranks,
        selected: members[best],
    })
}
