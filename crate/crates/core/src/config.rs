//! Flat `key = value` configuration files.
//!
//! Blank lines and text after `#` are ignored. Unknown keys and repeated keys
//! are errors so typos do not silently fall back to defaults.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::autolabel::PropagateParams;
use crate::error::{Error, Result};
use crate::imgcore::CannyThresholds;
use crate::ood::SvmParams;
use crate::pipeline::{PipelineConfig, SpotterMode};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub svm: SvmParams,
    pub propagate: PropagateParams,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            if !seen.insert(key.to_owned()) {
                return Err(Error::Config(format!("line {}: {key} set twice", lineno + 1)));
            }
            s.set(key, value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", lineno + 1)),
                other => other,
            })?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Applies one key; used by the parser and by command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.pipeline;
        match key {
            "seed" => {
                let seed: u64 = parse(key, value)?;
                self.set_seed(seed);
            }
            "threads" => p.threads = parse(key, value)?,
            "quality.window_size" => p.quality.window_size = parse(key, value)?,
            "quality.subsample_rate" => p.quality.subsample_rate = parse(key, value)?,
            "quality.lambda" => p.quality.lambda = parse(key, value)?,
            "quality.analysis_max_side" => p.quality.analysis_max_side = parse(key, value)?,
            "screen.theta" => p.screen.theta = parse(key, value)?,
            "screen.alpha" => p.screen.alpha = parse(key, value)?,
            "screen.canny_low" => p.screen.canny = CannyThresholds { low: parse(key, value)?, ..p.screen.canny },
            "screen.canny_high" => p.screen.canny = CannyThresholds { high: parse(key, value)?, ..p.screen.canny },
            "screen.close_w" => p.screen.close_w = parse(key, value)?,
            "screen.close_h" => p.screen.close_h = parse(key, value)?,
            "screen.busy_threshold" => p.screen.busy_threshold = parse(key, value)?,
            "screen.margin_px" => p.screen.margin_px = parse(key, value)?,
            "pipeline.stage_quality" => p.stages.quality = parse_bool(key, value)?,
            "pipeline.stage_screen" => p.stages.screen = parse_bool(key, value)?,
            "pipeline.stage_ood" => p.stages.ood = parse_bool(key, value)?,
            "pipeline.ood_model" => p.ood_model = Some(PathBuf::from(value)),
            "pipeline.spotter" => {
                if value != "mock" {
                    return Err(Error::Config(format!("pipeline.spotter: unknown spotter {value:?}")));
                }
            }
            "pipeline.timings" => p.timings = parse_bool(key, value)?,
            "spotter.mode" => {
                p.spotter.mode = match value {
                    "empty" => SpotterMode::Empty,
                    "echo" => SpotterMode::Echo,
                    "canned" => SpotterMode::Canned,
                    _ => return Err(Error::Config(format!("spotter.mode: unknown mode {value:?}"))),
                }
            }
            "spotter.cost_ms" => p.spotter.cost_ms = parse(key, value)?,
            "spotter.noise_px" => p.spotter.noise_px = parse(key, value)?,
            "spotter.annotations" => p.spotter.annotations = Some(PathBuf::from(value)),
            "ood.reg" => self.svm.reg = parse(key, value)?,
            "ood.epochs" => self.svm.epochs = parse(key, value)?,
            "autolabel.ratio" => self.propagate.ratio = parse(key, value)?,
            "autolabel.inlier_px" => self.propagate.ransac.inlier_px = parse(key, value)?,
            "autolabel.max_iters" => self.propagate.ransac.max_iters = parse(key, value)?,
            "autolabel.confidence" => self.propagate.ransac.confidence = parse(key, value)?,
            "autolabel.min_inliers" => self.propagate.min_inliers = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// One seed drives every random component.
    pub fn set_seed(&mut self, seed: u64) {
        self.pipeline.seed = seed;
        self.svm.seed = seed;
        self.propagate.ransac.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if !(self.svm.reg > 0.0) || self.svm.epochs == 0 {
            return Err(Error::Config("ood.reg must be positive and ood.epochs >= 1".into()));
        }
        let a = &self.propagate;
        if !(a.ratio > 0.0 && a.ratio < 1.0) {
            return Err(Error::Config("autolabel.ratio must lie in (0, 1)".into()));
        }
        if !(a.ransac.inlier_px > 0.0) || a.ransac.max_iters == 0 || !(a.ransac.confidence > 0.0 && a.ransac.confidence < 1.0) {
            return Err(Error::Config("autolabel RANSAC settings out of range".into()));
        }
        if a.min_inliers < 4 {
            return Err(Error::Config("autolabel.min_inliers must be >= 4".into()));
        }
        Ok(())
    }
}
