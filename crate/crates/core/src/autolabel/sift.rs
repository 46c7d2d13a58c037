//! Difference-of-Gaussians keypoints with 128-D gradient-histogram descriptors.

use std::f32::consts::PI;

use crate::imgcore::GrayImage;

pub const DESC_LEN: usize = 128;
pub type Descriptor = [f32; DESC_LEN];

const MIN_SIDE: usize = 32;
const BORDER: usize = 5;
const ORI_BINS: usize = 36;
const ORI_PEAK_RATIO: f32 = 0.8;
const DESC_WIDTH: usize = 4;
const DESC_BINS: usize = 8;
const DESC_CLAMP: f32 = 0.2;
const MAX_REFINE_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftParams {
    pub scales_per_octave: usize,
    pub sigma: f32,
    /// Minimum |DoG| at the refined extremum, on intensities scaled to [0, 1].
    pub contrast_threshold: f32,
    pub edge_ratio: f32,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self { scales_per_octave: 3, sigma: 1.6, contrast_threshold: 0.04, edge_ratio: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    /// Blur level in input pixels.
    pub scale: f32,
    /// Radians, image axes (y down).
    pub orientation: f32,
    pub octave: usize,
    pub response: f32,
}

#[derive(Debug, Clone, Default)]
pub struct KeypointSet {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    fn half(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (2 * x, 2 * y);
                data.push(0.25 * (self.at(sx, sy) + self.at(sx + 1, sy) + self.at(sx, sy + 1) + self.at(sx + 1, sy + 1)));
            }
        }
        Plane { w, h, data }
    }

    fn blur(&self, sigma: f32) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let r = (3.0 * sigma).ceil() as isize;
        let mut k: Vec<f32> = (-r..=r).map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp()).collect();
        let s: f32 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        let (w, h) = (self.w as isize, self.h as isize);
        let mut tmp = vec![0.0f32; self.data.len()];
        for y in 0..h {
            let row = &self.data[(y * w) as usize..((y + 1) * w) as usize];
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let xx = (x + i as isize - r).clamp(0, w - 1);
                    acc += kv * row[xx as usize];
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let mut out = vec![0.0f32; self.data.len()];
        for y in 0..h {
            for (i, kv) in k.iter().enumerate() {
                let yy = (y + i as isize - r).clamp(0, h - 1);
                let src = &tmp[(yy * w) as usize..((yy + 1) * w) as usize];
                let dst = &mut out[(y * w) as usize..((y + 1) * w) as usize];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += kv * s;
                }
            }
        }
        Plane { w: self.w, h: self.h, data: out }
    }
}

struct Octave {
    gauss: Vec<Plane>,
    dog: Vec<Plane>,
}

fn build_pyramid(img: &GrayImage, p: &SiftParams) -> Vec<Octave> {
    let s = p.scales_per_octave;
    let n_oct = (img.width.min(img.height) as f32).log2().floor() as usize - 2;
    let k = 2f32.powf(1.0 / s as f32);
    let sigmas: Vec<f32> = (0..s + 3).map(|i| p.sigma * k.powi(i as i32)).collect();
    // The input is assumed to carry blur 0.5.
    let mut base = Plane { w: img.width, h: img.height, data: img.data.iter().map(|&v| v as f32 / 255.0).collect() }
        .blur((p.sigma * p.sigma - 0.25).sqrt());
    let mut octaves = Vec::with_capacity(n_oct);
    for o in 0..n_oct {
        if o > 0 {
            base = octaves.last().map(|oc: &Octave| oc.gauss[s].half()).expect("previous octave");
        }
        let mut gauss = vec![base.clone()];
        for i in 1..s + 3 {
            let inc = (sigmas[i] * sigmas[i] - sigmas[i - 1] * sigmas[i - 1]).sqrt();
            let next = gauss[i - 1].blur(inc);
            gauss.push(next);
        }
        let dog = gauss
            .windows(2)
            .map(|g| Plane { w: g[0].w, h: g[0].h, data: g[1].data.iter().zip(&g[0].data).map(|(a, b)| a - b).collect() })
            .collect();
        octaves.push(Octave { gauss, dog });
    }
    octaves
}

fn is_extremum(dog: &[Plane], l: usize, x: usize, y: usize) -> bool {
    let v = dog[l].at(x, y);
    let mut max = true;
    let mut min = true;
    for plane in &dog[l - 1..=l + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                let n = plane.at(xx, yy);
                max &= v >= n;
                min &= v <= n;
            }
        }
    }
    (v > 0.0 && max) || (v < 0.0 && min)
}

/// Sub-pixel refinement; returns (x, y, layer offsets, value) or `None` when rejected.
fn refine(dog: &[Plane], mut l: usize, mut x: usize, mut y: usize, p: &SiftParams) -> Option<(f32, f32, f32, usize, usize, usize, f32)> {
    let s = p.scales_per_octave;
    let (w, h) = (dog[0].w, dog[0].h);
    for _ in 0..MAX_REFINE_STEPS {
        let (c, pr, nx) = (&dog[l], &dog[l - 1], &dog[l + 1]);
        let v = c.at(x, y);
        let g = [
            0.5 * (c.at(x + 1, y) - c.at(x - 1, y)),
            0.5 * (c.at(x, y + 1) - c.at(x, y - 1)),
            0.5 * (nx.at(x, y) - pr.at(x, y)),
        ];
        let dxx = c.at(x + 1, y) + c.at(x - 1, y) - 2.0 * v;
        let dyy = c.at(x, y + 1) + c.at(x, y - 1) - 2.0 * v;
        let dss = nx.at(x, y) + pr.at(x, y) - 2.0 * v;
        let dxy = 0.25 * (c.at(x + 1, y + 1) - c.at(x - 1, y + 1) - c.at(x + 1, y - 1) + c.at(x - 1, y - 1));
        let dxs = 0.25 * (nx.at(x + 1, y) - nx.at(x - 1, y) - pr.at(x + 1, y) + pr.at(x - 1, y));
        let dys = 0.25 * (nx.at(x, y + 1) - nx.at(x, y - 1) - pr.at(x, y + 1) + pr.at(x, y - 1));
        let hm = nalgebra::Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss);
        let off = hm.lu().solve(&nalgebra::Vector3::new(-g[0], -g[1], -g[2]))?;
        if off.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if off.iter().all(|v| v.abs() < 0.5) {
            let contrast = v + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
            if contrast.abs() * s as f32 >= p.contrast_threshold {
                let tr = dxx + dyy;
                let det = dxx * dyy - dxy * dxy;
                let r = p.edge_ratio;
                if det > 0.0 && tr * tr * r < (r + 1.0) * (r + 1.0) * det {
                    return Some((off[0], off[1], off[2], x, y, l, contrast));
                }
            }
            return None;
        }
        let step = |c: usize, d: f32| c as isize + d.round() as isize;
        let (nx_, ny_, nl_) = (step(x, off[0]), step(y, off[1]), step(l, off[2]));
        if nl_ < 1 || nl_ > s as isize || nx_ < BORDER as isize || ny_ < BORDER as isize || nx_ >= (w - BORDER) as isize || ny_ >= (h - BORDER) as isize {
            return None;
        }
        (x, y, l) = (nx_ as usize, ny_ as usize, nl_ as usize);
    }
    None
}

fn gradient(g: &Plane, x: usize, y: usize) -> (f32, f32) {
    (g.at(x + 1, y) - g.at(x - 1, y), g.at(x, y + 1) - g.at(x, y - 1))
}

/// Dominant orientations at octave coordinates (x, y) with octave-relative blur `sig`.
fn orientations(g: &Plane, x: f32, y: f32, sig: f32) -> Vec<f32> {
    let ws = 1.5 * sig;
    let radius = (3.0 * ws).round() as isize;
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut hist = [0.0f32; ORI_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (px, py) = (cx + dx, cy + dy);
            if px < 1 || py < 1 || px >= g.w as isize - 1 || py >= g.h as isize - 1 {
                continue;
            }
            let (gx, gy) = gradient(g, px as usize, py as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            let weight = (-((dx * dx + dy * dy) as f32) / (2.0 * ws * ws)).exp();
            let ang = gy.atan2(gx).rem_euclid(2.0 * PI);
            let bin = ((ang * ORI_BINS as f32 / (2.0 * PI)).round() as usize) % ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    let mut smooth = [0.0f32; ORI_BINS];
    for i in 0..ORI_BINS {
        let at = |d: isize| hist[(i as isize + d).rem_euclid(ORI_BINS as isize) as usize];
        smooth[i] = (at(-2) + at(2)) / 16.0 + (at(-1) + at(1)) * 4.0 / 16.0 + at(0) * 6.0 / 16.0;
    }
    let max = smooth.iter().copied().fold(0.0, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..ORI_BINS {
        let l = smooth[(i + ORI_BINS - 1) % ORI_BINS];
        let r = smooth[(i + 1) % ORI_BINS];
        let v = smooth[i];
        if v > l && v > r && v >= ORI_PEAK_RATIO * max {
            let frac = 0.5 * (l - r) / (l - 2.0 * v + r);
            let bin = (i as f32 + frac).rem_euclid(ORI_BINS as f32);
            out.push(bin * 2.0 * PI / ORI_BINS as f32);
        }
    }
    out
}

fn describe(g: &Plane, x: f32, y: f32, sig: f32, angle: f32) -> Descriptor {
    let d = DESC_WIDTH as f32;
    let n = DESC_BINS as f32;
    let hist_w = 3.0 * sig;
    let radius = ((hist_w * std::f32::consts::SQRT_2 * (d + 1.0) * 0.5).round() as isize).min((g.w.max(g.h)) as isize);
    let (sin_a, cos_a) = angle.sin_cos();
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut hist = [0.0f32; (DESC_WIDTH + 2) * (DESC_WIDTH + 2) * (DESC_BINS + 2)];
    let idx = |r: usize, c: usize, o: usize| (r * (DESC_WIDTH + 2) + c) * (DESC_BINS + 2) + o;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (px, py) = (cx + dx, cy + dy);
            if px < 1 || py < 1 || px >= g.w as isize - 1 || py >= g.h as isize - 1 {
                continue;
            }
            // Offsets from the true keypoint position, rotated into the keypoint frame.
            let (fx, fy) = (px as f32 - x, py as f32 - y);
            let xr = (cos_a * fx + sin_a * fy) / hist_w;
            let yr = (-sin_a * fx + cos_a * fy) / hist_w;
            let rbin = yr + d / 2.0 - 0.5;
            let cbin = xr + d / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d {
                continue;
            }
            let (gx, gy) = gradient(g, px as usize, py as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            let ori = (gy.atan2(gx) - angle).rem_euclid(2.0 * PI);
            let obin = ori * n / (2.0 * PI);
            let weight = (-(xr * xr + yr * yr) / (2.0 * (0.5 * d) * (0.5 * d))).exp();
            let v = mag * weight;
            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (ri, wr) in [(0usize, 1.0 - fr), (1, fr)] {
                for (ci, wc) in [(0usize, 1.0 - fc), (1, fc)] {
                    for (oi, wo) in [(0usize, 1.0 - fo), (1, fo)] {
                        let r = (r0 as isize + 1 + ri as isize) as usize;
                        let c = (c0 as isize + 1 + ci as isize) as usize;
                        let o = (o0 as usize + oi) % DESC_BINS;
                        hist[idx(r, c, o)] += v * wr * wc * wo;
                    }
                }
            }
        }
    }
    let mut desc = [0.0f32; DESC_LEN];
    for r in 0..DESC_WIDTH {
        for c in 0..DESC_WIDTH {
            for o in 0..DESC_BINS {
                desc[(r * DESC_WIDTH + c) * DESC_BINS + o] = hist[idx(r + 1, c + 1, o)];
            }
        }
    }
    normalize(&mut desc);
    desc.iter_mut().for_each(|v| *v = v.min(DESC_CLAMP));
    normalize(&mut desc);
    desc
}

fn normalize(v: &mut Descriptor) {
    let n = v.iter().map(|a| a * a).sum::<f32>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
}

/// Detects and describes keypoints. Images smaller than 32x32 yield an empty set.
pub fn detect_and_describe(img: &GrayImage, params: &SiftParams) -> KeypointSet {
    let mut set = KeypointSet::default();
    if img.width < MIN_SIDE || img.height < MIN_SIDE {
        return set;
    }
    let s = params.scales_per_octave;
    let pre = 0.5 * params.contrast_threshold / s as f32;
    for (o, oct) in build_pyramid(img, params).iter().enumerate() {
        let (w, h) = (oct.dog[0].w, oct.dog[0].h);
        if w <= 2 * BORDER + 1 || h <= 2 * BORDER + 1 {
            break;
        }
        let factor = (1usize << o) as f32;
        for l in 1..=s {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if oct.dog[l].at(x, y).abs() <= pre || !is_extremum(&oct.dog, l, x, y) {
                        continue;
                    }
                    let Some((ox, oy, ol, ix, iy, il, resp)) = refine(&oct.dog, l, x, y, params) else { continue };
                    let (kx, ky) = (ix as f32 + ox, iy as f32 + oy);
                    let sig = params.sigma * 2f32.powf((il as f32 + ol) / s as f32);
                    let g = &oct.gauss[il];
                    for angle in orientations(g, kx, ky, sig) {
                        set.keypoints.push(Keypoint {
                            // Octave pixel i covers input pixels [i*f, (i+1)*f).
                            x: (kx + 0.5) * factor - 0.5,
                            y: (ky + 0.5) * factor - 0.5,
                            scale: sig * factor,
                            orientation: angle,
                            octave: o,
                            response: resp.abs(),
                        });
                        set.descriptors.push(describe(g, kx, ky, sig, angle));
                    }
                }
            }
        }
    }
    set
}
