//! Propagation of quadrilateral text annotations along a frame sequence.

mod geometry;
mod matching;
mod propagate;
mod ransac;
mod sift;

pub use geometry::{warp_quad, Homography, Point, Quad};
pub use matching::{match_descriptors, Match, MatchSet, SINGLE_TARGET_CAP};
pub use propagate::{propagate_annotations, PropagateParams, Propagation, StepDiagnostics, StepStatus};
pub use ransac::{estimate_homography, fit_homography, RansacParams};
pub use sift::{detect_and_describe, Descriptor, Keypoint, KeypointSet, SiftParams, DESC_LEN};
