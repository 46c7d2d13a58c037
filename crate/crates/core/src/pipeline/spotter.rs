use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::meter::burn_cpu;
use crate::annotation::AnnotationDocument;
use crate::autolabel::Quad;
use crate::imgcore::Frame;
use crate::textregion::PixelRect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotterResult {
    pub frame: usize,
    pub quads: Vec<Quad>,
    pub transcriptions: Vec<String>,
}

/// Downstream detector/recognizer hook. `region` is the part of `frame` the
/// spotter is allowed to look at; results are in full-frame coordinates.
pub trait Spotter: Send + Sync {
    fn id(&self) -> String;
    fn spot(&self, frame: &Frame, region: PixelRect) -> SpotterResult;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotterMode {
    /// No detections.
    #[default]
    Empty,
    /// Ground-truth boxes inside the region, jittered and clamped.
    Echo,
    /// Stored boxes for the frame index, returned as is.
    Canned,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpotterConfig {
    pub mode: SpotterMode,
    /// CPU time burnt per call.
    pub cost_ms: f64,
    /// Uniform corner jitter for echo mode.
    pub noise_px: f64,
    /// Annotation document backing echo and canned modes.
    pub annotations: Option<PathBuf>,
}

pub struct MockSpotter {
    mode: SpotterMode,
    cost_ns: u64,
    noise_px: f64,
    seed: u64,
    boxes: BTreeMap<usize, Vec<(Quad, String)>>,
}

impl MockSpotter {
    pub fn new(cfg: &SpotterConfig, doc: Option<&AnnotationDocument>, seed: u64) -> Self {
        let boxes = doc
            .map(|d| {
                d.by_frame()
                    .into_iter()
                    .map(|(i, anns)| (i, anns.iter().map(|a| (a.quad, a.text().to_owned())).collect()))
                    .collect()
            })
            .unwrap_or_default();
        Self { mode: cfg.mode, cost_ns: (cfg.cost_ms.max(0.0) * 1e6) as u64, noise_px: cfg.noise_px.max(0.0), seed, boxes }
    }

    fn echo(&self, frame: &Frame, region: PixelRect) -> Vec<(Quad, String)> {
        let Some(list) = self.boxes.get(&frame.index) else { return Vec::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (frame.index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (x0, y0) = (region.x as f64, region.y as f64);
        let (x1, y1) = ((region.x + region.width) as f64, (region.y + region.height) as f64);
        let mut out = Vec::new();
        for (q, text) in list {
            let c = q.corners();
            let (cx, cy) = (c.iter().map(|p| p[0]).sum::<f64>() / 4.0, c.iter().map(|p| p[1]).sum::<f64>() / 4.0);
            // Jitter is drawn for every box so results do not depend on the region.
            let jitter: [[f64; 2]; 4] = std::array::from_fn(|_| {
                if self.noise_px > 0.0 {
                    [rng.gen_range(-self.noise_px..=self.noise_px), rng.gen_range(-self.noise_px..=self.noise_px)]
                } else {
                    [0.0, 0.0]
                }
            });
            if !(cx >= x0 && cx < x1 && cy >= y0 && cy < y1) {
                continue;
            }
            let moved = std::array::from_fn(|k| [(c[k][0] + jitter[k][0]).clamp(x0, x1), (c[k][1] + jitter[k][1]).clamp(y0, y1)]);
            if let Ok(q) = Quad::new(moved) {
                out.push((q, text.clone()));
            }
        }
        out
    }
}

impl Spotter for MockSpotter {
    fn id(&self) -> String {
        format!("mock-{:?}", self.mode).to_lowercase()
    }

    fn spot(&self, frame: &Frame, region: PixelRect) -> SpotterResult {
        if self.cost_ns > 0 {
            burn_cpu(self.cost_ns);
        }
        let found = match self.mode {
            SpotterMode::Empty => Vec::new(),
            SpotterMode::Canned => self.boxes.get(&frame.index).cloned().unwrap_or_default(),
            SpotterMode::Echo => self.echo(frame, region),
        };
        let (quads, transcriptions) = found.into_iter().unzip();
        SpotterResult { frame: frame.index, quads, transcriptions }
    }
}
