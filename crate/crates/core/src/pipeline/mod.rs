//! Frame flow: ingest, sub-sample, Stage I selection, Stage II screening and
//! cropping, Stage III rejection, then the downstream spotter, with per-stage
//! metering.

mod meter;
mod spotter;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use meter::{burn_cpu, meter, thread_cpu_ns, Stage, StageEntry, StageMetrics};
pub use spotter::{MockSpotter, Spotter, SpotterConfig, SpotterMode, SpotterResult};

use crate::error::{Error, Result};
use crate::imgcore::Frame;
use crate::io::FrameSource;
use crate::ood::{EdgeDensityGrid, FeatureExtractor, SvmModel};
use crate::quality::{score_frame, select_highest_quality, sliding_windows, subsample, FrameScores, QualityConfig};
use crate::textregion::{closed_edge_map, screen_closed, PixelRect, ScreenConfig, Verdict};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageToggles {
    pub quality: bool,
    pub screen: bool,
    pub ood: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self { quality: true, screen: true, ood: true }
    }
}

impl StageToggles {
    /// All eight on/off combinations, in binary order of (quality, screen, ood).
    pub fn all_subsets() -> Vec<StageToggles> {
        (0..8).map(|b| StageToggles { quality: b & 4 != 0, screen: b & 2 != 0, ood: b & 1 != 0 }).collect()
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.quality {
            parts.push("I");
        }
        if self.screen {
            parts.push("II");
        }
        if self.ood {
            parts.push("III");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub quality: QualityConfig,
    pub screen: ScreenConfig,
    pub stages: StageToggles,
    /// Required when Stage III is on.
    pub ood_model: Option<PathBuf>,
    pub spotter: SpotterConfig,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Write wall and CPU times into the metrics file.
    pub timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            quality: QualityConfig::default(),
            screen: ScreenConfig::default(),
            stages: StageToggles::default(),
            ood_model: None,
            spotter: SpotterConfig::default(),
            seed: 0,
            threads: 0,
            timings: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.quality.validate()?;
        self.screen.validate()?;
        if !(self.spotter.cost_ms >= 0.0) || !(self.spotter.noise_px >= 0.0) {
            return Err(Error::Config("spotter.cost_ms and spotter.noise_px must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum Fate {
    /// Dropped by sub-sampling.
    Skipped,
    /// Lost the Stage I comparison within its window.
    NotSelected,
    DecodeError { reason: String },
    Rejected { stage: Stage },
    Spotted { region: PixelRect, detections: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub index: usize,
    #[serde(flatten)]
    pub fate: Fate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<FrameScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screen: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood_score: Option<f64>,
}

impl FrameTrace {
    fn new(index: usize, fate: Fate) -> Self {
        Self { index, fate, window: None, scores: None, screen: None, ood_score: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub version: u32,
    pub stages: StageToggles,
    pub spotter: String,
    pub frames: Vec<FrameTrace>,
}

impl Trace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn spotted(&self) -> impl Iterator<Item = &FrameTrace> {
        self.frames.iter().filter(|f| matches!(f.fate, Fate::Spotted { .. }))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub results: Vec<SpotterResult>,
    pub metrics: StageMetrics,
    pub trace: Trace,
}

struct UnitOutput {
    traces: Vec<FrameTrace>,
    results: Vec<SpotterResult>,
    metrics: StageMetrics,
}

struct Runner<'a> {
    source: &'a dyn FrameSource,
    cfg: &'a PipelineConfig,
    model: Option<&'a SvmModel>,
    spotter: &'a dyn Spotter,
    extractor: EdgeDensityGrid,
}

impl Runner<'_> {
    /// One Stage I window, or a single frame when Stage I is off.
    fn run_unit(&self, window_id: usize, members: &[usize]) -> UnitOutput {
        let mut m = StageMetrics::default();
        let mut traces = Vec::with_capacity(members.len());
        let mut frames: Vec<Frame> = Vec::with_capacity(members.len());
        for &pos in members {
            let loaded = meter(m.get_mut(Stage::Ingest), 1, 0, || {
                let r = self.source.load(pos);
                let ok = r.is_ok() as u64;
                (r, ok)
            });
            match loaded {
                Ok(f) => {
                    m.get_mut(Stage::Ingest).bytes_in += f.byte_len() as u64;
                    frames.push(f);
                }
                Err(e) => traces.push(FrameTrace::new(pos, Fate::DecodeError { reason: e.to_string() })),
            }
        }
        let mut results = Vec::new();
        if frames.is_empty() {
            return UnitOutput { traces, results, metrics: m };
        }

        let (chosen, scores) = if self.cfg.stages.quality {
            let bytes = frames.iter().map(|f| f.byte_len() as u64).sum();
            let (sel, scores) = meter(m.get_mut(Stage::Quality), frames.len() as u64, bytes, || {
                let scores: Vec<FrameScores> = frames.iter().map(|f| score_frame(f, &self.cfg.quality)).collect();
                let idx: Vec<usize> = frames.iter().map(|f| f.index).collect();
                let sel = select_highest_quality(window_id, &idx, &scores, self.cfg.quality.lambda).expect("non-empty window");
                ((sel, scores), 1)
            });
            let k = frames.iter().position(|f| f.index == sel.selected).expect("selected member");
            for (i, f) in frames.iter().enumerate() {
                if i != k {
                    let mut t = FrameTrace::new(f.index, Fate::NotSelected);
                    t.window = Some(window_id);
                    t.scores = Some(scores[i]);
                    traces.push(t);
                }
            }
            (vec![frames.swap_remove(k)], Some(scores[k]))
        } else {
            (frames, None)
        };

        for frame in chosen {
            let mut t = FrameTrace::new(frame.index, Fate::Skipped);
            if self.cfg.stages.quality {
                t.window = Some(window_id);
                t.scores = scores;
            }
            t.fate = self.after_selection(&frame, &mut t, &mut m, &mut results);
            traces.push(t);
        }
        traces.sort_by_key(|t| t.index);
        UnitOutput { traces, results, metrics: m }
    }

    fn after_selection(&self, frame: &Frame, t: &mut FrameTrace, m: &mut StageMetrics, results: &mut Vec<SpotterResult>) -> Fate {
        let bytes = frame.byte_len() as u64;
        let full = PixelRect { x: 0, y: 0, width: frame.width, height: frame.height };
        let mut closed = None;
        let mut region = full;
        if self.cfg.stages.screen {
            let decision = meter(m.get_mut(Stage::Screen), 1, bytes, || {
                let c = closed_edge_map(&frame.to_rgb(), &self.cfg.screen).expect("rgb frame");
                let d = screen_closed(&c, &self.cfg.screen);
                closed = Some(c);
                let pass = !d.is_reject() as u64;
                (d, pass)
            });
            t.screen = Some(decision.verdict.clone());
            match decision.verdict {
                Verdict::Reject => return Fate::Rejected { stage: Stage::Screen },
                Verdict::AcceptWhole => {}
                Verdict::AcceptCrop { rect } => region = rect.to_pixel_rect(frame.height),
            }
        }
        if self.cfg.stages.ood {
            let model = self.model.expect("checked before the run");
            let score = meter(m.get_mut(Stage::Ood), 1, bytes, || {
                // Features always come from the full-frame edge map, never the crop.
                let c = match closed.take() {
                    Some(c) => c,
                    None => closed_edge_map(&frame.to_rgb(), &self.cfg.screen).expect("rgb frame"),
                };
                let v = model.decision_value(&self.extractor.from_closed(&c)).expect("dimension checked");
                (v, (v >= 0.0) as u64)
            });
            t.ood_score = Some(score);
            if score < 0.0 {
                return Fate::Rejected { stage: Stage::Ood };
            }
        }
        let r = meter(m.get_mut(Stage::Spotter), 1, (region.area() * frame.channels as usize) as u64, || {
            (self.spotter.spot(frame, region), 1)
        });
        let detections = r.quads.len();
        results.push(r);
        Fate::Spotted { region, detections }
    }
}

/// Runs the enabled stages over `source`. Windows are processed in parallel and
/// reassembled in temporal order, so the output does not depend on thread count.
pub fn run_pipeline(
    source: &dyn FrameSource,
    cfg: &PipelineConfig,
    model: Option<&SvmModel>,
    spotter: &dyn Spotter,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let extractor = EdgeDensityGrid { screen: cfg.screen, ..Default::default() };
    if cfg.stages.ood {
        let m = model.ok_or_else(|| Error::Config("Stage III is enabled but no OOD model was given".into()))?;
        if m.extractor != extractor.id() || m.dim != extractor.dim() {
            return Err(Error::Config(format!("OOD model expects {} features from {:?}", m.dim, m.extractor)));
        }
    }
    let n = source.len();
    let all: Vec<usize> = (0..n).collect();
    let mut skipped = Vec::new();
    let units: Vec<Vec<usize>> = if cfg.stages.quality {
        let kept = subsample(&all, cfg.quality.subsample_rate);
        let mut mask = vec![false; n];
        kept.iter().for_each(|&i| mask[i] = true);
        skipped.extend((0..n).filter(|&i| !mask[i]).map(|i| FrameTrace::new(i, Fate::Skipped)));
        sliding_windows(&kept, cfg.quality.window_size)
    } else {
        all.iter().map(|&i| vec![i]).collect()
    };

    let runner = Runner { source, cfg, model, spotter, extractor };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let outputs: Vec<UnitOutput> =
        pool.install(|| units.par_iter().enumerate().map(|(w, members)| runner.run_unit(w, members)).collect());

    let mut metrics = StageMetrics::default();
    let mut results = Vec::new();
    let mut frames = skipped;
    for u in outputs {
        metrics.merge(&u.metrics);
        results.extend(u.results);
        frames.extend(u.traces);
    }
    frames.sort_by_key(|t| t.index);
    let trace = Trace { version: TRACE_VERSION, stages: cfg.stages, spotter: spotter.id(), frames };
    Ok(PipelineOutput { results, metrics, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::MemorySource;
    use crate::ood::{extract_features, svm_train, SvmParams};
    use crate::synth;

    fn cfg(stages: StageToggles) -> PipelineConfig {
        PipelineConfig { stages, ..Default::default() }
    }

    fn empty_spotter() -> MockSpotter {
        MockSpotter::new(&SpotterConfig::default(), None, 0)
    }

    fn text_frames(n: usize) -> Vec<Frame> {
        (0..n).map(|i| synth::text_block_frame(i as u64, 160, 120, None).frame).collect()
    }

    fn toy_model() -> SvmModel {
        let pos: Vec<_> = (0..8).map(|s| extract_features(&synth::text_block_frame(100 + s, 160, 120, None).frame).unwrap()).collect();
        let neg: Vec<_> = (0..8u8).map(|s| extract_features(&synth::blank_frame(160, 120, [s * 20, 40, 90])).unwrap()).collect();
        let labels: Vec<i8> = std::iter::repeat(1).take(8).chain(std::iter::repeat(-1).take(8)).collect();
        svm_train(&[pos, neg].concat(), &labels, &EdgeDensityGrid::default().id(), SvmParams::default()).unwrap()
    }

    #[test]
    fn pass_through_spots_everything() {
        let src = MemorySource::new(text_frames(10));
        let out = run_pipeline(&src, &cfg(StageToggles { quality: false, screen: false, ood: false }), None, &empty_spotter()).unwrap();
        assert_eq!(out.results.len(), 10);
        assert_eq!(out.trace.frames.len(), 10);
        assert_eq!(out.metrics.get(Stage::Spotter).frames_in, 10);
    }

    #[test]
    fn stage_one_keeps_one_per_window() {
        let src = MemorySource::new(text_frames(10));
        let mut c = cfg(StageToggles { quality: true, screen: false, ood: false });
        c.quality.window_size = 5;
        c.quality.subsample_rate = 1;
        let out = run_pipeline(&src, &c, None, &empty_spotter()).unwrap();
        assert_eq!(out.results.len(), 2);
        let q = out.metrics.get(Stage::Quality);
        assert_eq!((q.frames_in, q.frames_out), (10, 2));
    }

    #[test]
    fn decode_errors_are_traced() {
        let mut frames: Vec<std::result::Result<Frame, String>> = text_frames(4).into_iter().map(Ok).collect();
        frames[2] = Err("truncated".into());
        let src = MemorySource::with_failures(frames);
        let out = run_pipeline(&src, &cfg(StageToggles { quality: false, screen: false, ood: false }), None, &empty_spotter()).unwrap();
        assert_eq!(out.results.len(), 3);
        assert!(matches!(out.trace.frames[2].fate, Fate::DecodeError { .. }));
    }

    #[test]
    fn stage_three_needs_a_model() {
        let src = MemorySource::new(text_frames(2));
        assert!(run_pipeline(&src, &cfg(StageToggles::default()), None, &empty_spotter()).is_err());
    }

    #[test]
    fn blank_frames_stop_early() {
        let mut frames = text_frames(4);
        frames.extend((0..4).map(|_| synth::blank_frame(160, 120, [30, 30, 30])));
        let src = MemorySource::new(frames);
        let model = toy_model();
        let c = PipelineConfig { stages: StageToggles { quality: false, screen: true, ood: true }, ..Default::default() };
        let out = run_pipeline(&src, &c, Some(&model), &empty_spotter()).unwrap();
        for t in &out.trace.frames[4..] {
            assert_eq!(t.fate, Fate::Rejected { stage: Stage::Screen });
            assert!(t.ood_score.is_none());
        }
        assert_eq!(out.metrics.get(Stage::Ood).frames_in, out.metrics.get(Stage::Screen).frames_out);
    }

    #[test]
    fn disabling_stages_never_reduces_invocations() {
        let video = synth::synthetic_video(3, 60, 12, 8, 160, 120);
        let src = MemorySource::new(video.frames);
        let model = toy_model();
        let count = |s: StageToggles| run_pipeline(&src, &cfg(s), Some(&model), &empty_spotter()).unwrap().results.len();
        let subsets = StageToggles::all_subsets();
        let counts: Vec<usize> = subsets.iter().map(|&s| count(s)).collect();
        for (i, a) in subsets.iter().enumerate() {
            for (j, b) in subsets.iter().enumerate() {
                let b_superset = (b.quality || !a.quality) && (b.screen || !a.screen) && (b.ood || !a.ood);
                if b_superset {
                    assert!(counts[i] >= counts[j], "{} -> {}, {} -> {}", a.label(), counts[i], b.label(), counts[j]);
                }
            }
        }
    }

    #[test]
    fn output_independent_of_threads() {
        let video = synth::synthetic_video(4, 48, 12, 6, 160, 120);
        let src = MemorySource::new(video.frames);
        let model = toy_model();
        let run = |threads| {
            let c = PipelineConfig { threads, ..Default::default() };
            let out = run_pipeline(&src, &c, Some(&model), &empty_spotter()).unwrap();
            (out.trace.to_json().unwrap(), out.metrics.to_json(false).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn totals_are_stage_sums() {
        let src = MemorySource::new(text_frames(6));
        let out = run_pipeline(&src, &cfg(StageToggles { quality: true, screen: true, ood: false }), None, &empty_spotter()).unwrap();
        let t = out.metrics.total();
        let sum: u64 = Stage::ALL.iter().map(|s| out.metrics.get(*s).cpu_ns).sum();
        assert_eq!(t.cpu_ns, sum);
        for s in Stage::ALL {
            let e = out.metrics.get(s);
            assert!(e.frames_out <= e.frames_in);
        }
    }
}
