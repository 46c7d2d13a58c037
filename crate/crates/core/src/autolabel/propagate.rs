use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{warp_quad, Point, Quad};
use super::matching::match_descriptors;
use super::ransac::{estimate_homography, reprojection_error, RansacParams};
use super::sift::{detect_and_describe, SiftParams};
use crate::error::{Error, Result};
use crate::imgcore::{to_grayscale, Frame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateParams {
    pub sift: SiftParams,
    pub ratio: f32,
    pub ransac: RansacParams,
    /// A step whose homography has fewer inliers counts as failed.
    pub min_inliers: usize,
}

impl Default for PropagateParams {
    fn default() -> Self {
        Self { sift: SiftParams::default(), ratio: 0.75, ransac: RansacParams::default(), min_inliers: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    PropagationFailed { reason: String },
}

/// One matching step from `frame - 1` to `frame` (positions in the input list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub frame: usize,
    pub matches: usize,
    pub inliers: usize,
    pub mean_reprojection_error: f64,
    #[serde(flatten)]
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// Quads for each annotated frame, starting with the seeds; shorter than the input after a halt.
    pub quads: Vec<Vec<Quad>>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Position of the frame where the chain stopped.
    pub halted_at: Option<usize>,
}

fn step(
    pos: usize,
    prev: &super::sift::KeypointSet,
    cur: &super::sift::KeypointSet,
    quads: &[Quad],
    params: &PropagateParams,
) -> (StepDiagnostics, Option<Vec<Quad>>) {
    let m = match_descriptors(&prev.descriptors, &cur.descriptors, params.ratio);
    let mut diag = StepDiagnostics {
        frame: pos,
        matches: m.len(),
        inliers: 0,
        mean_reprojection_error: 0.0,
        status: StepStatus::Ok,
    };
    let fail = |mut d: StepDiagnostics, reason: String| {
        d.status = StepStatus::PropagationFailed { reason };
        (d, None)
    };
    if m.len() < 4 {
        return fail(diag, format!("only {} matches", m.len()));
    }
    let src: Vec<Point> = m.iter().map(|x| [prev.keypoints[x.src].x as f64, prev.keypoints[x.src].y as f64]).collect();
    let dst: Vec<Point> = m.iter().map(|x| [cur.keypoints[x.dst].x as f64, cur.keypoints[x.dst].y as f64]).collect();
    let ransac = RansacParams { seed: params.ransac.seed.wrapping_add(pos as u64), ..params.ransac };
    let (h, mask) = match estimate_homography(&src, &dst, &ransac) {
        Ok(v) => v,
        Err(e) => return fail(diag, e.to_string()),
    };
    let errs: Vec<f64> = (0..mask.len()).filter(|&i| mask[i]).map(|i| reprojection_error(&h, src[i], dst[i])).collect();
    diag.inliers = errs.len();
    diag.mean_reprojection_error = if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 };
    if diag.inliers < params.min_inliers {
        return fail(diag, format!("only {} inliers", errs.len()));
    }
    match quads.iter().map(|q| warp_quad(q, &h)).collect::<Result<Vec<_>>>() {
        Ok(next) => (diag, Some(next)),
        Err(e) => fail(diag, e.to_string()),
    }
}

/// Chains frame-to-frame homographies from the seeds on the first frame.
/// `on_step` sees each step's diagnostics, and the step's quads when it
/// succeeded, as soon as they are known.
pub fn propagate_annotations(
    frames: &[Frame],
    seeds: &[Quad],
    params: &PropagateParams,
    mut on_step: impl FnMut(&StepDiagnostics, Option<&[Quad]>),
) -> Result<Propagation> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("no frames to propagate over".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no seed quads".into()));
    }
    let features: Vec<_> = frames.par_iter().map(|f| detect_and_describe(&to_grayscale(f), &params.sift)).collect();
    let mut quads = vec![seeds.to_vec()];
    let mut diagnostics = Vec::new();
    let mut halted_at = None;
    for pos in 1..frames.len() {
        let (diag, next) = step(pos, &features[pos - 1], &features[pos], quads.last().expect("seeded"), params);
        on_step(&diag, next.as_deref());
        diagnostics.push(diag);
        match next {
            Some(q) => quads.push(q),
            None => {
                halted_at = Some(pos);
                break;
            }
        }
    }
    Ok(Propagation { quads, diagnostics, halted_at })
}
