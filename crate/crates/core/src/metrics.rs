//! Polygon overlap, edit distance and the max-IoU evaluation protocol.

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationDocument;
use crate::autolabel::{Point, Quad};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub iou: f64,
    pub iop: f64,
    pub iog: f64,
}

fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a[0] * b[1] - a[1] * b[0]
    })
    .sum::<f64>()
}

/// Corners reordered to positive orientation; errors unless strictly convex with nonzero area.
fn convex_ccw(q: &Quad) -> Result<Vec<Point>> {
    let mut c = q.corners().to_vec();
    let area = shoelace(&c);
    if area.abs() <= 1e-12 {
        return Err(Error::InvalidQuad("zero area".into()));
    }
    if area < 0.0 {
        c.reverse();
    }
    for i in 0..4 {
        let (a, b, d) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
        let cross = (b[0] - a[0]) * (d[1] - b[1]) - (b[1] - a[1]) * (d[0] - b[0]);
        if cross < 0.0 {
            return Err(Error::InvalidQuad("not convex".into()));
        }
    }
    Ok(c)
}

/// Sutherland-Hodgman: `subject` clipped by the convex, positively oriented `clip`.
fn clip(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: Point| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

pub fn polygon_overlap(p: &Quad, g: &Quad) -> Result<Overlap> {
    let (pp, gg) = (convex_ccw(p)?, convex_ccw(g)?);
    let inter = clip(&pp, &gg);
    let inter = if inter.len() < 3 { 0.0 } else { shoelace(&inter).max(0.0) };
    let (ap, ag) = (shoelace(&pp), shoelace(&gg));
    let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
    let union = ap + ag - inter;
    Ok(Overlap { iou: ratio(inter, union), iop: ratio(inter, ap), iog: ratio(inter, ag) })
}

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != cb)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// A box with its text, as compared by [`match_and_score`].
#[derive(Debug, Clone, PartialEq)]
pub struct TextBox {
    pub quad: Quad,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtScore {
    pub frame: usize,
    pub gt: usize,
    pub matched: Option<usize>,
    pub iou: f64,
    pub iop: f64,
    pub iog: f64,
    pub edit_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_gt: Vec<GtScore>,
    pub mean_iou: f64,
    pub mean_iop: f64,
    pub mean_iog: f64,
    pub mean_edit_distance: f64,
    /// Pairs whose overlap could not be computed; they count as non-overlapping.
    pub errors: Vec<String>,
}

impl EvalReport {
    fn from_scores(per_gt: Vec<GtScore>, errors: Vec<String>) -> Self {
        let n = per_gt.len();
        let mean = |f: &dyn Fn(&GtScore) -> f64| if n == 0 { 0.0 } else { per_gt.iter().map(f).sum::<f64>() / n as f64 };
        EvalReport {
            mean_iou: mean(&|s| s.iou),
            mean_iop: mean(&|s| s.iop),
            mean_iog: mean(&|s| s.iog),
            mean_edit_distance: mean(&|s| s.edit_distance as f64),
            per_gt,
            errors,
        }
    }
}

fn score_frame(frame: usize, preds: &[TextBox], gts: &[TextBox], errors: &mut Vec<String>) -> Vec<GtScore> {
    gts.iter()
        .enumerate()
        .map(|(gi, g)| {
            let mut best: Option<(usize, Overlap)> = None;
            for (pi, p) in preds.iter().enumerate() {
                let o = match polygon_overlap(&p.quad, &g.quad) {
                    Ok(o) => o,
                    Err(e) => {
                        errors.push(format!("frame {frame} pred {pi} gt {gi}: {e}"));
                        continue;
                    }
                };
                if o.iou > 0.0 && best.map_or(true, |(_, b)| o.iou > b.iou) {
                    best = Some((pi, o));
                }
            }
            match best {
                Some((pi, o)) => GtScore { frame, gt: gi, matched: Some(pi), iou: o.iou, iop: o.iop, iog: o.iog, edit_distance: edit_distance(&preds[pi].text, &g.text) },
                None => GtScore { frame, gt: gi, matched: None, iou: 0.0, iop: 0.0, iog: 0.0, edit_distance: g.text.chars().count() },
            }
        })
        .collect()
}

/// For each ground truth, picks the prediction of highest IoU (lowest id on ties).
pub fn match_and_score(preds: &[TextBox], gts: &[TextBox]) -> EvalReport {
    let mut errors = Vec::new();
    let scores = score_frame(0, preds, gts, &mut errors);
    EvalReport::from_scores(scores, errors)
}

/// Scores every ground-truth frame against the prediction frame of the same index.
pub fn evaluate_documents(pred: &AnnotationDocument, gt: &AnnotationDocument) -> EvalReport {
    let preds = pred.by_frame();
    let mut errors = Vec::new();
    let mut scores = Vec::new();
    let boxes = |a: &[crate::annotation::Annotation]| a.iter().map(|x| TextBox { quad: x.quad, text: x.text().to_owned() }).collect::<Vec<_>>();
    for (index, gts) in gt.by_frame() {
        let p = preds.get(&index).map(|a| boxes(a)).unwrap_or_default();
        scores.extend(score_frame(index, &p, &boxes(gts), &mut errors));
    }
    EvalReport::from_scores(scores, errors)
}
