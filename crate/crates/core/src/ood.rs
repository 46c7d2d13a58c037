//! Stage III: linear-SVM rejection of out-of-distribution frames.
//!
//! Features come from a pluggable [`FeatureExtractor`]; the default is the
//! per-cell edge density of the closed Stage II edge map on an 8x8 grid. The
//! classifier is trained with seeded Pegasos-style subgradient descent on the
//! L2-regularized hinge loss over z-scored features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryImage, Frame};
use crate::textregion::{closed_edge_map, ScreenConfig};

pub const MODEL_VERSION: u32 = 1;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub trait FeatureExtractor: Send + Sync {
    /// Stored in trained models so a model is never paired with the wrong features.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn extract(&self, frame: &Frame) -> Result<FeatureVector>;
}

/// Edge density per cell of a `grid`x`grid` partition of the closed edge map.
#[derive(Debug, Clone)]
pub struct EdgeDensityGrid {
    pub grid: usize,
    pub screen: ScreenConfig,
}

impl Default for EdgeDensityGrid {
    fn default() -> Self {
        Self { grid: 8, screen: ScreenConfig::default() }
    }
}

impl EdgeDensityGrid {
    pub fn from_closed(&self, closed: &BinaryImage) -> FeatureVector {
        let g = self.grid;
        let (w, h) = (closed.width, closed.height);
        let mut out = Vec::with_capacity(g * g);
        for cy in 0..g {
            let (y0, y1) = (cy * h / g, (cy + 1) * h / g);
            for cx in 0..g {
                let (x0, x1) = (cx * w / g, (cx + 1) * w / g);
                let area = (x1 - x0) * (y1 - y0);
                if area == 0 {
                    out.push(0.0);
                    continue;
                }
                let ones: usize = (y0..y1).map(|y| closed.data[y * w + x0..y * w + x1].iter().map(|&v| v as usize).sum::<usize>()).sum();
                out.push(ones as f64 / area as f64);
            }
        }
        FeatureVector(out)
    }
}

impl FeatureExtractor for EdgeDensityGrid {
    fn id(&self) -> String {
        format!("edge-density-grid-{0}x{0}", self.grid)
    }

    fn dim(&self) -> usize {
        self.grid * self.grid
    }

    fn extract(&self, frame: &Frame) -> Result<FeatureVector> {
        Ok(self.from_closed(&closed_edge_map(&frame.to_rgb(), &self.screen)?))
    }
}

/// Default extractor applied to one frame.
pub fn extract_features(frame: &Frame) -> Result<FeatureVector> {
    EdgeDensityGrid::default().extract(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodLabel {
    /// Positive: keep the frame.
    InDistribution,
    /// Negative: reject early.
    OutOfDistribution,
}

impl OodLabel {
    pub fn is_accept(self) -> bool {
        self == OodLabel::InDistribution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub reg: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { reg: 1e-4, epochs: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub version: u32,
    pub extractor: String,
    pub dim: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub seed: u64,
    pub reg: f64,
    pub epochs: usize,
}

impl SvmModel {
    pub fn decision_value(&self, features: &FeatureVector) -> Result<f64> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: features.dim() });
        }
        Ok(features
            .0
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .zip(&self.weights)
            .map(|(((x, m), s), w)| w * (x - m) / s)
            .sum::<f64>()
            + self.bias)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(text)?;
        if model.version != MODEL_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported model version {}", model.version)));
        }
        for v in [&model.means, &model.stds, &model.weights] {
            if v.len() != model.dim {
                return Err(Error::DimensionMismatch { expected: model.dim, actual: v.len() });
            }
        }
        if model.stds.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument("model stds must be positive".into()));
        }
        Ok(model)
    }
}

/// Labels by the sign of the decision value; exactly zero counts as in-distribution.
pub fn svm_predict(model: &SvmModel, features: &FeatureVector) -> Result<OodLabel> {
    Ok(if model.decision_value(features)? >= 0.0 { OodLabel::InDistribution } else { OodLabel::OutOfDistribution })
}

/// Per-epoch record of the training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    /// Objective of the retained averaged iterate at the end of each epoch.
    pub averaged_objective: Vec<f64>,
}

/// `reg/2 * |w|^2 + mean hinge` over standardized, bias-augmented samples.
fn objective(w: &[f64], xs: &[Vec<f64>], ys: &[f64], reg: f64) -> f64 {
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    let hinge: f64 = xs.iter().zip(ys).map(|(x, y)| (1.0 - y * dot(w, x)).max(0.0)).sum::<f64>() / xs.len() as f64;
    0.5 * reg * norm2 + hinge
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains a linear SVM; `labels` are +1 (in-distribution) or -1.
pub fn svm_train(samples: &[FeatureVector], labels: &[i8], extractor: &str, params: SvmParams) -> Result<SvmModel> {
    svm_train_traced(samples, labels, extractor, params).map(|(m, _)| m)
}

pub fn svm_train_traced(
    samples: &[FeatureVector],
    labels: &[i8],
    extractor: &str,
    params: SvmParams,
) -> Result<(SvmModel, TrainingTrace)> {
    if samples.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), actual: labels.len() });
    }
    if labels.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    if !(params.reg > 0.0) || params.epochs == 0 {
        return Err(Error::InvalidArgument("reg must be positive and epochs >= 1".into()));
    }
    let dim = samples[0].dim();
    if let Some(bad) = samples.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
    }
    if samples.iter().flat_map(|s| &s.0).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }

    let n = samples.len() as f64;
    let means: Vec<f64> = (0..dim).map(|k| samples.iter().map(|s| s.0[k]).sum::<f64>() / n).collect();
    let stds: Vec<f64> = (0..dim)
        .map(|k| {
            let var = samples.iter().map(|s| (s.0[k] - means[k]).powi(2)).sum::<f64>() / n;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    // Standardized features with a trailing constant 1 for the bias.
    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.0.iter().zip(&means).zip(&stds).map(|((x, m), sd)| (x - m) / sd).chain([1.0]).collect())
        .collect();
    let ys: Vec<f64> = labels.iter().map(|&l| l as f64).collect();

    let reg = params.reg;
    let radius = 1.0 / reg.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut w = vec![0.0; dim + 1];
    let mut sum = vec![0.0; dim + 1];
    let mut steps = 0usize;
    let mut averaged_objective = Vec::with_capacity(params.epochs);
    let mut avg = vec![0.0; dim + 1];
    // The running average is only retained when it improves on the previous
    // retained point, starting from the zero vector.
    let mut kept = vec![0.0; dim + 1];
    let mut kept_obj = objective(&kept, &xs, &ys, reg);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            steps += 1;
            let eta = 1.0 / (reg * steps as f64);
            let margin = ys[i] * dot(&w, &xs[i]);
            let shrink = 1.0 - eta * reg;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += eta * ys[i] * x;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
            for (a, v) in sum.iter_mut().zip(&w) {
                *a += v;
            }
        }
        for (a, s) in avg.iter_mut().zip(&sum) {
            *a = s / steps as f64;
        }
        let obj = objective(&avg, &xs, &ys, reg);
        if obj <= kept_obj {
            kept.copy_from_slice(&avg);
            kept_obj = obj;
        }
        averaged_objective.push(kept_obj);
    }

    let zero = vec![0.0; dim + 1];
    let best = [&w, &kept, &zero]
        .into_iter()
        .map(|cand| (objective(cand, &xs, &ys, reg), cand))
        .fold(None::<(f64, &Vec<f64>)>, |acc, (obj, cand)| match acc {
            Some((b, _)) if b <= obj => acc,
            _ => Some((obj, cand)),
        })
        .map(|(_, c)| c.clone())
        .expect("three candidates");

    let model = SvmModel {
        version: MODEL_VERSION,
        extractor: extractor.to_owned(),
        dim,
        means,
        stds,
        weights: best[..dim].to_vec(),
        bias: best[dim],
        seed: params.seed,
        reg,
        epochs: params.epochs,
    };
    Ok((model, TrainingTrace { averaged_objective }))
}
