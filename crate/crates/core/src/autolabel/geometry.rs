use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Four corners in pixel coordinates (origin top-left), clockwise from top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[Point; 4]", into = "[Point; 4]")]
pub struct Quad {
    corners: [Point; 4],
}

impl Quad {
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        if corners.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidQuad("non-finite corner".into()));
        }
        if !is_simple(&corners) {
            return Err(Error::InvalidQuad(format!("self-intersecting: {corners:?}")));
        }
        Ok(Self { corners })
    }

    /// Axis-aligned box with top-left `(x, y)`.
    pub fn from_rect(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new([[x, y], [x + w, y], [x + w, y + h], [x, y + h]])
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.corners
    }

    /// Largest corner-to-corner distance between two quads.
    pub fn max_corner_distance(&self, other: &Quad) -> f64 {
        self.corners
            .iter()
            .zip(&other.corners)
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Quad {
        Quad { corners: self.corners.map(|[x, y]| [x + dx, y + dy]) }
    }
}

impl TryFrom<[Point; 4]> for Quad {
    type Error = Error;
    fn try_from(c: [Point; 4]) -> Result<Self> {
        Quad::new(c)
    }
}

impl From<Quad> for [Point; 4] {
    fn from(q: Quad) -> Self {
        q.corners
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Only opposite edges of a quadrilateral can cross.
fn is_simple(c: &[Point; 4]) -> bool {
    !segments_cross(c[0], c[1], c[2], c[3]) && !segments_cross(c[1], c[2], c[3], c[0])
}

/// Planar projective transform, scaled so `h[2][2] == 1` when that entry is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub h: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Self {
        Self { h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { h: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]] }
    }

    /// Rotation by `angle` radians about `center`, then uniform `scale`, then translation.
    pub fn similarity(angle: f64, scale: f64, center: Point, t: Point) -> Self {
        let (s, c) = angle.sin_cos();
        let (a, b) = (scale * c, scale * s);
        let [cx, cy] = center;
        Self {
            h: [
                [a, -b, cx - a * cx + b * cy + t[0]],
                [b, a, cy - b * cx - a * cy + t[1]],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    /// Normalizes and rejects near-singular matrices.
    pub fn from_matrix(mut h: [[f64; 3]; 3]) -> Result<Self> {
        if h.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite homography".into()));
        }
        let s = h[2][2];
        if s.abs() > 1e-12 {
            h.iter_mut().flatten().for_each(|v| *v /= s);
        }
        let out = Self { h };
        if out.det().abs() <= 1e-12 {
            return Err(Error::InvalidArgument("singular homography".into()));
        }
        Ok(out)
    }

    pub fn det(&self) -> f64 {
        let m = &self.h;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.h[i][k] * other.h[k][j]).sum();
            }
        }
        Homography::from_matrix(out)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.h;
        let d = self.det();
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        Homography::from_matrix([
            [cof(1, 2, 1, 2) / d, -cof(0, 2, 1, 2) / d, cof(0, 1, 1, 2) / d],
            [-cof(1, 2, 0, 2) / d, cof(0, 2, 0, 2) / d, -cof(0, 1, 0, 2) / d],
            [cof(1, 2, 0, 1) / d, -cof(0, 2, 0, 1) / d, cof(0, 1, 0, 1) / d],
        ])
    }

    /// Homogeneous image of `p` before dehomogenization.
    pub fn apply_h(&self, p: Point) -> [f64; 3] {
        let m = &self.h;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2],
        ]
    }

    pub fn apply(&self, p: Point) -> Result<Point> {
        let [x, y, w] = self.apply_h(p);
        if w.abs() <= 1e-9 {
            return Err(Error::PointAtInfinity);
        }
        Ok([x / w, y / w])
    }
}

pub fn warp_quad(q: &Quad, h: &Homography) -> Result<Quad> {
    let c = q.corners();
    Quad::new([h.apply(c[0])?, h.apply(c[1])?, h.apply(c[2])?, h.apply(c[3])?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Quad, b: &Quad, tol: f64) -> bool {
        a.max_corner_distance(b) <= tol
    }

    #[test]
    fn quad_validation() {
        assert!(Quad::new([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).is_ok());
        // Bow-tie.
        assert!(Quad::new([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(Quad::new([[f64::NAN, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).is_err());
        let q = Quad::from_rect(1.0, 2.0, 3.0, 4.0).unwrap();
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, "[[1.0,2.0],[4.0,2.0],[4.0,6.0],[1.0,6.0]]");
        assert_eq!(serde_json::from_str::<Quad>(&json).unwrap(), q);
        assert!(serde_json::from_str::<Quad>("[[0,0],[1,1],[1,0],[0,1]]").is_err());
    }

    #[test]
    fn identity_and_translation() {
        let q = Quad::from_rect(10.0, 20.0, 30.0, 5.0).unwrap();
        assert_eq!(warp_quad(&q, &Homography::identity()).unwrap(), q);
        let t = warp_quad(&q, &Homography::translation(4.0, -2.5)).unwrap();
        assert_eq!(t, q.translated(4.0, -2.5));
    }

    #[test]
    fn projective_unit_square() {
        let h = Homography::from_matrix([[2.0, 0.5, 1.0], [0.0, 1.0, 3.0], [0.25, 0.5, 1.0]]).unwrap();
        let q = warp_quad(&Quad::from_rect(0.0, 0.0, 1.0, 1.0).unwrap(), &h).unwrap();
        // (0,0)->(1,3)/1; (1,0)->(3,3)/1.25; (1,1)->(3.5,4)/1.75; (0,1)->(1.5,4)/1.5
        let want = [[1.0, 3.0], [2.4, 2.4], [2.0, 4.0 / 1.75], [1.0, 4.0 / 1.5]];
        for (a, b) in q.corners().iter().zip(&want) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12, "{a:?} {b:?}");
        }
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(h.apply([-1.0, 5.0]), Err(Error::PointAtInfinity)));
        assert!(Homography::from_matrix([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let h = Homography::from_matrix([[1.1, 0.1, 5.0], [-0.05, 0.95, -3.0], [1e-4, -2e-4, 1.0]]).unwrap();
        let id = h.compose(&h.inverse().unwrap()).unwrap();
        for (i, row) in id.h.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    fn mild_h() -> impl Strategy<Value = Homography> {
        (-0.3f64..0.3, 0.8f64..1.2, -30.0f64..30.0, -30.0f64..30.0, -5e-4f64..5e-4, -5e-4f64..5e-4).prop_map(
            |(a, s, tx, ty, g, k)| {
                let mut h = Homography::similarity(a, s, [50.0, 50.0], [tx, ty]).h;
                h[2][0] = g;
                h[2][1] = k;
                Homography::from_matrix(h).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn warp_composes(h1 in mild_h(), h2 in mild_h(), x in 0.0f64..50.0, y in 0.0f64..50.0, w in 5.0f64..50.0, hh in 5.0f64..50.0) {
            let q = Quad::from_rect(x, y, w, hh).unwrap();
            let direct = warp_quad(&q, &h1.compose(&h2).unwrap()).unwrap();
            let chained = warp_quad(&warp_quad(&q, &h2).unwrap(), &h1).unwrap();
            prop_assert!(close(&direct, &chained, 1e-6));
        }
    }
}
