//! Deterministic synthetic imagery for tests, benchmarks and demos.
//!
//! Every generator is a pure function of its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgcore::{gaussian_blur, BinaryImage, Frame, GrayImage};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn split_channels(frame: &Frame) -> Vec<GrayImage> {
    let c = frame.channels as usize;
    (0..c)
        .map(|k| GrayImage {
            width: frame.width,
            height: frame.height,
            data: frame.pixels.iter().skip(k).step_by(c).copied().collect(),
        })
        .collect()
}

fn merge_channels(index: usize, planes: &[GrayImage]) -> Frame {
    let (w, h) = (planes[0].width, planes[0].height);
    let mut pixels = Vec::with_capacity(w * h * planes.len());
    for i in 0..w * h {
        for p in planes {
            pixels.push(p.data[i]);
        }
    }
    Frame::new(index, w, h, planes.len() as u8, pixels).expect("planes share dimensions")
}

/// Gaussian-blurs every channel; `sigma <= 0` returns a copy.
pub fn blur_frame(frame: &Frame, sigma: f64) -> Frame {
    let planes: Vec<GrayImage> = split_channels(frame).iter().map(|p| gaussian_blur(p, sigma)).collect();
    Frame { timestamp: frame.timestamp, ..merge_channels(frame.index, &planes) }
}

/// Smooth background plus random ellipses, rectangles and bars in random colours.
pub fn textured_frame(seed: u64, width: usize, height: usize) -> Frame {
    let mut r = rng(seed);
    let (w, h) = (width as f64, height as f64);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (r.gen_range(0.01..0.06), r.gen_range(0.01..0.06), r.gen_range(0.0..6.28), r.gen_range(10.0..30.0)))
        .collect();
    let base: [f64; 3] = [r.gen_range(70.0..180.0), r.gen_range(70.0..180.0), r.gen_range(70.0..180.0)];
    let mut px = vec![0.0f64; width * height * 3];
    for y in 0..height {
        for x in 0..width {
            let s: f64 = waves.iter().map(|&(fx, fy, ph, a)| a * (fx * x as f64 + fy * y as f64 + ph).sin()).sum();
            for c in 0..3 {
                px[(y * width + x) * 3 + c] = base[c] + s * (1.0 - 0.3 * c as f64);
            }
        }
    }
    let area = w * h;
    let shapes = ((area / 1200.0) as usize).clamp(20, 400);
    for _ in 0..shapes {
        let color: [f64; 3] = [r.gen_range(0.0..255.0), r.gen_range(0.0..255.0), r.gen_range(0.0..255.0)];
        let cx = r.gen_range(0.0..w);
        let cy = r.gen_range(0.0..h);
        let rx = r.gen_range(3.0..(w.min(h) / 10.0).max(4.0));
        let ry = r.gen_range(3.0..(w.min(h) / 10.0).max(4.0));
        let kind = r.gen_range(0..3);
        let angle: f64 = r.gen_range(0.0..std::f64::consts::PI);
        let (sa, ca) = angle.sin_cos();
        let x0 = (cx - rx.max(ry) - 1.0).max(0.0) as usize;
        let x1 = ((cx + rx.max(ry) + 1.0) as usize).min(width - 1);
        let y0 = (cy - rx.max(ry) - 1.0).max(0.0) as usize;
        let y1 = ((cy + rx.max(ry) + 1.0) as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let (u, v) = (dx * ca + dy * sa, -dx * sa + dy * ca);
                let inside = match kind {
                    0 => (u / rx).powi(2) + (v / ry).powi(2) <= 1.0,
                    1 => u.abs() <= rx && v.abs() <= ry,
                    _ => u.abs() <= rx && v.abs() <= 1.5,
                };
                if inside {
                    let i = (y * width + x) * 3;
                    px[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    }
    let pixels = px.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    Frame::from_rgb(0, width, height, pixels).expect("consistent size")
}

/// Uniform colour.
pub fn blank_frame(width: usize, height: usize, rgb: [u8; 3]) -> Frame {
    Frame::from_rgb(0, width, height, rgb.repeat(width * height)).expect("consistent size")
}

/// Axis-aligned block of glyph-like strokes on a light background.
#[derive(Debug, Clone)]
pub struct TextBlockFrame {
    pub frame: Frame,
    /// Stroke pixels.
    pub strokes: BinaryImage,
    /// Block bounds `(x, y, w, h)`, top-left origin.
    pub block: (usize, usize, usize, usize),
}

/// Lines of pseudo-characters made of horizontal, vertical and diagonal strokes.
pub fn text_block_frame(seed: u64, width: usize, height: usize, origin: Option<(usize, usize)>) -> TextBlockFrame {
    let mut r = rng(seed);
    let (cell_w, cell_h, gap_x, gap_y) = (12usize, 18usize, 4usize, 10usize);
    let cols = r.gen_range(6..10).min((width / 2) / (cell_w + gap_x)).max(2);
    let lines = r.gen_range(2..4).min((height / 2) / (cell_h + gap_y)).max(1);
    let block_w = cols * (cell_w + gap_x) - gap_x;
    let block_h = lines * (cell_h + gap_y) - gap_y;
    let (bx, by) = origin.unwrap_or_else(|| {
        let mx = (width - block_w) / 2;
        let my = (height - block_h) / 2;
        (r.gen_range(mx / 2..=mx + mx / 2), r.gen_range(my / 2..=my + my / 2))
    });
    let bg: [u8; 3] = [r.gen_range(215..=255), r.gen_range(215..=255), r.gen_range(215..=255)];
    let ink: [u8; 3] = [r.gen_range(0..50), r.gen_range(0..50), r.gen_range(0..50)];
    let mut strokes = BinaryImage::new(width, height);
    for line in 0..lines {
        for col in 0..cols {
            let ox = bx + col * (cell_w + gap_x);
            let oy = by + line * (cell_h + gap_y);
            // Letter-like glyphs: strokes snap to the cell sides and three bar heights.
            // Every glyph has a vertical stem plus one to three other strokes.
            let stem = r.gen_range(0..2);
            let n = r.gen_range(2..5);
            for k in 0..n {
                let template = if k == 0 { stem } else { r.gen_range(0..7) };
                let (x0, y0, x1, y1) = match template {
                    0 => (0, 0, 0, cell_h - 1),
                    1 => (cell_w - 2, 0, cell_w - 2, cell_h - 1),
                    2 => (0, 0, cell_w - 1, 0),
                    3 => (0, cell_h / 2, cell_w - 1, cell_h / 2),
                    4 => (0, cell_h - 2, cell_w - 1, cell_h - 2),
                    5 => (0, 0, cell_w - 1, cell_h - 1),
                    _ => (cell_w - 1, 0, 0, cell_h - 1),
                };
                let steps = cell_w.max(cell_h) * 2;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64;
                    let x = (x0 as f64 + t * (x1 as f64 - x0 as f64)).round() as usize;
                    let y = (y0 as f64 + t * (y1 as f64 - y0 as f64)).round() as usize;
                    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let (px, py) = ((ox + x + dx).min(ox + cell_w - 1), (oy + y + dy).min(oy + cell_h - 1));
                        if px < width && py < height {
                            strokes.set(px, py, true);
                        }
                    }
                }
            }
        }
    }
    let pixels = strokes.data.iter().flat_map(|&s| if s == 1 { ink } else { bg }).collect();
    TextBlockFrame {
        frame: Frame::from_rgb(0, width, height, pixels).expect("consistent size"),
        strokes,
        block: (bx, by, block_w, block_h),
    }
}

/// Cluttered background: random small speckles of random colour scattered over the frame.
pub fn noise_frame(seed: u64, width: usize, height: usize) -> Frame {
    let mut r = rng(seed);
    let bg: [u8; 3] = r.gen();
    let mut pixels = bg.repeat(width * height);
    let count = width * height / 40;
    for _ in 0..count {
        let color: [u8; 3] = r.gen();
        let (sw, sh) = (r.gen_range(1..4), r.gen_range(1..4));
        let (x0, y0) = (r.gen_range(0..width), r.gen_range(0..height));
        for y in y0..(y0 + sh).min(height) {
            for x in x0..(x0 + sw).min(width) {
                pixels[(y * width + x) * 3..(y * width + x) * 3 + 3].copy_from_slice(&color);
            }
        }
    }
    Frame::from_rgb(0, width, height, pixels).expect("consistent size")
}

/// Resamples `src` through `target_to_source` (bilinear); unmapped pixels are black.
pub fn warp_frame(src: &Frame, width: usize, height: usize, target_to_source: impl Fn(f64, f64) -> Option<(f64, f64)>) -> Frame {
    let c = src.channels as usize;
    let mut pixels = vec![0u8; width * height * c];
    for y in 0..height {
        for x in 0..width {
            let Some((sx, sy)) = target_to_source(x as f64, y as f64) else { continue };
            if sx < 0.0 || sy < 0.0 || sx > (src.width - 1) as f64 || sy > (src.height - 1) as f64 {
                continue;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(src.width - 1), (y0 + 1).min(src.height - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for k in 0..c {
                let p = |xx: usize, yy: usize| src.pixels[(yy * src.width + xx) * c + k] as f64;
                let v = (p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx) * (1.0 - fy) + (p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx) * fy;
                pixels[(y * width + x) * c + k] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::new(src.index, width, height, src.channels, pixels).expect("consistent size")
}

/// A camera panning across a static textured scene.
#[derive(Debug, Clone)]
pub struct PanSequence {
    pub frames: Vec<Frame>,
    /// Top-left of each frame's window in scene coordinates.
    pub offsets: Vec<(f64, f64)>,
}

/// `count` frames of `width`x`height`, moving by `step` scene pixels per frame.
pub fn pan_sequence(seed: u64, count: usize, width: usize, height: usize, step: (f64, f64)) -> PanSequence {
    let margin_x = (step.0.abs() * count as f64).ceil() as usize + 2;
    let margin_y = (step.1.abs() * count as f64).ceil() as usize + 2;
    let scene = textured_frame(seed, width + margin_x, height + margin_y);
    let start = (if step.0 < 0.0 { margin_x as f64 - 1.0 } else { 0.0 }, if step.1 < 0.0 { margin_y as f64 - 1.0 } else { 0.0 });
    let mut frames = Vec::with_capacity(count);
    let mut offsets = Vec::with_capacity(count);
    for i in 0..count {
        let (ox, oy) = (start.0 + step.0 * i as f64, start.1 + step.1 * i as f64);
        let mut f = warp_frame(&scene, width, height, |x, y| Some((x + ox, y + oy)));
        f.index = i;
        frames.push(f);
        offsets.push((ox, oy));
    }
    PanSequence { frames, offsets }
}

/// What a synthetic video frame shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Text scene `scene`, sharp.
    Text { scene: usize },
    /// Text scene `scene`, motion-blurred.
    BlurredText { scene: usize },
    /// Featureless gap between scenes.
    Blank,
    /// Heavily blurred gap.
    Blurred,
}

impl FrameKind {
    pub fn scene(&self) -> Option<usize> {
        match *self {
            FrameKind::Text { scene } | FrameKind::BlurredText { scene } => Some(scene),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub frames: Vec<Frame>,
    pub kinds: Vec<FrameKind>,
    pub scene_count: usize,
}

/// Text scenes separated by blank or blurred gaps.
///
/// Each scene shows one text block drifting slowly with a few blurred
/// frames mixed in; gaps alternate between flat colour and heavy blur.
pub fn synthetic_video(seed: u64, total: usize, scene_len: usize, gap_len: usize, width: usize, height: usize) -> SyntheticVideo {
    let mut r = rng(seed ^ 0x5eed);
    let mut frames = Vec::with_capacity(total);
    let mut kinds = Vec::with_capacity(total);
    let mut scene = 0usize;
    while frames.len() < total {
        let block = text_block_frame(seed.wrapping_mul(1000).wrapping_add(scene as u64), width, height, None);
        for k in 0..scene_len {
            if frames.len() >= total {
                break;
            }
            let shift = k as f64 * 0.5;
            let mut f = warp_frame(&block.frame, width, height, |x, y| Some((x - shift, y)));
            // Re-fill the uncovered strip with background colour.
            let bg = [block.frame.pixels[0], block.frame.pixels[1], block.frame.pixels[2]];
            for y in 0..height {
                for x in 0..(shift.ceil() as usize).min(width) {
                    f.pixels[(y * width + x) * 3..(y * width + x) * 3 + 3].copy_from_slice(&bg);
                }
            }
            let kind = if r.gen_bool(0.3) {
                f = blur_frame(&f, r.gen_range(1.5..3.0));
                FrameKind::BlurredText { scene }
            } else {
                FrameKind::Text { scene }
            };
            frames.push(f);
            kinds.push(kind);
        }
        for k in 0..gap_len {
            if frames.len() >= total {
                break;
            }
            let (f, kind) = if scene % 2 == 0 {
                let shade = r.gen_range(20..235);
                (blank_frame(width, height, [shade, shade, shade.saturating_add(10)]), FrameKind::Blank)
            } else {
                (blur_frame(&textured_frame(seed ^ (scene * 97 + k) as u64, width, height), 6.0), FrameKind::Blurred)
            };
            frames.push(f);
            kinds.push(kind);
        }
        scene += 1;
    }
    for (i, f) in frames.iter_mut().enumerate() {
        f.index = i;
        f.timestamp = i as f64 / 30.0;
    }
    let scene_count = kinds.iter().filter_map(FrameKind::scene).max().map_or(0, |s| s + 1);
    SyntheticVideo { frames, kinds, scene_count }
}
