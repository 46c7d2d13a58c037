use rayon::prelude::*;

use super::sift::Descriptor;

/// Absolute distance cap used when the target set holds a single descriptor.
pub const SINGLE_TARGET_CAP: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub src: usize,
    pub dst: usize,
    pub distance: f32,
}

pub type MatchSet = Vec<Match>;

fn dist2(a: &Descriptor, b: &Descriptor) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Brute-force nearest neighbours with Lowe's ratio test, in source order.
/// Equal nearest and second-nearest distances never pass.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f32) -> MatchSet {
    assert!(ratio > 0.0 && ratio < 1.0, "ratio must lie in (0, 1)");
    if b.is_empty() {
        return Vec::new();
    }
    a.par_iter()
        .enumerate()
        .filter_map(|(i, da)| {
            let (mut best, mut second, mut best_j) = (f32::INFINITY, f32::INFINITY, 0);
            for (j, db) in b.iter().enumerate() {
                let d = dist2(da, db);
                if d < best {
                    second = best;
                    best = d;
                    best_j = j;
                } else if d < second {
                    second = d;
                }
            }
            let (d1, d2) = (best.sqrt(), second.sqrt());
            let keep = if b.len() == 1 { d1 < SINGLE_TARGET_CAP } else { d1 < ratio * d2 };
            keep.then_some(Match { src: i, dst: best_j, distance: d1 })
        })
        .collect()
}
