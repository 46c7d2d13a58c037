//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use e2vts_core::annotation::{Annotation, AnnotationDocument, Source};
use e2vts_core::autolabel::{
    detect_and_describe, estimate_homography, match_descriptors, propagate_annotations, Homography, Point, PropagateParams, Quad, RansacParams,
    SiftParams, StepStatus,
};
use e2vts_core::imgcore::{dft2_magnitude, to_grayscale, BinaryImage, Frame, GrayImage};
use e2vts_core::io::write_frame_dir;
use e2vts_core::metrics::{edit_distance, polygon_overlap};
use e2vts_core::ood::{svm_predict, svm_train, EdgeDensityGrid, FeatureExtractor, FeatureVector, OodLabel, SvmParams};
use e2vts_core::pipeline::{run_pipeline, Fate, MockSpotter, PipelineConfig, SpotterConfig, Stage, StageToggles};
use e2vts_core::quality::{score_frame, select_highest_quality, QualityConfig};
use e2vts_core::synth;
use e2vts_core::textregion::{axis_histograms, screen_frame, ScreenConfig, Verdict};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BLUR_SIGMAS: [f64; 4] = [0.0, 1.0, 2.0, 4.0];
const BLUR_FRAMES: usize = 50;
const BLUR_MONOTONE_MIN: f64 = 0.95;
const BLUR_SELECT_MIN: f64 = 0.98;
const BLUR_BUDGET: Duration = Duration::from_secs(30);

const DFT_MAX_SIDE: usize = 16;
const DFT_REL_TOL: f64 = 1e-6;

const HIST_IMAGES: usize = 100;
const SCREEN_TEXT_FRAMES: usize = 20;
const SCREEN_BLANK_FRAMES: usize = 20;
const SCREEN_COVERAGE_MIN: f64 = 0.95;
const SCREEN_AREA_MAX: f64 = 0.60;

const H_TRIALS: usize = 100;
const H_SIZE: usize = 512;
const H_OUTLIER_FRACTION: f64 = 0.30;
const H_CORNER_TOL: f64 = 2.0;
const H_PASS_MIN: f64 = 0.95;
const H_BUDGET: Duration = Duration::from_secs(120);

const DRIFT_FRAMES: usize = 20;
const DRIFT_STEP_TOL: f64 = 3.0;
const DRIFT_TOTAL_TOL: f64 = 10.0;

const SVM_POINTS: usize = 200;
const SVM_MARGIN: f64 = 0.5;
const SVM_HELDOUT_MIN: f64 = 0.99;

const EDIT_PAIRS: usize = 1000;
const IOU_PAIRS: usize = 200;
const IOU_RASTER: usize = 1000;
const IOU_TOL: f64 = 1e-3;

const VIDEO_FRAMES: usize = 300;
const SPOT_FRACTION_MAX: f64 = 0.25;
const SCENES_REACHED_MIN: f64 = 0.90;
const SPOT_COST_MS: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn blur_ordering() -> Outcome {
    let start = Instant::now();
    let cfg = QualityConfig::default();
    let mut r = rng(11);
    let (mut lv_ok, mut fft_ok, mut picked) = (0, 0, 0);
    for i in 0..BLUR_FRAMES {
        let base = synth::textured_frame(1000 + i as u64, 320, 240);
        let scores: Vec<_> = BLUR_SIGMAS.iter().map(|&s| score_frame(&synth::blur_frame(&base, s), &cfg)).collect();
        lv_ok += scores.windows(2).all(|w| w[0].laplacian_var > w[1].laplacian_var) as usize;
        fft_ok += scores.windows(2).all(|w| w[0].fft > w[1].fft) as usize;
        let mut order: Vec<usize> = (0..BLUR_SIGMAS.len()).collect();
        order.shuffle(&mut r);
        let members: Vec<usize> = order.clone();
        let window_scores: Vec<_> = order.iter().map(|&k| scores[k]).collect();
        let sel = select_highest_quality(i, &members, &window_scores, 0.5).expect("non-empty window");
        picked += (sel.selected == 0) as usize;
    }
    let n = BLUR_FRAMES as f64;
    let elapsed = start.elapsed();
    let pass = lv_ok as f64 / n >= BLUR_MONOTONE_MIN
        && fft_ok as f64 / n >= BLUR_MONOTONE_MIN
        && picked as f64 / n >= BLUR_SELECT_MIN
        && elapsed < BLUR_BUDGET;
    outcome(pass, format!("LV monotone {lv_ok}/{BLUR_FRAMES}, FFT monotone {fft_ok}/{BLUR_FRAMES}, sharp picked {picked}/{BLUR_FRAMES}, {elapsed:.1?}"))
}

fn naive_dft_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * std::f64::consts::PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    let p = img.get(x, y) as f64;
                    re += p * phase.cos();
                    im += p * phase.sin();
                }
            }
            out.push(re.hypot(im));
        }
    }
    out
}

fn dft_oracle() -> Outcome {
    let mut r = rng(12);
    let mut worst = 0.0f64;
    for h in 1..=DFT_MAX_SIDE {
        for w in 1..=DFT_MAX_SIDE {
            let img = GrayImage::from_fn(w, h, |_, _| r.gen());
            let fast = dft2_magnitude(&img);
            let slow = naive_dft_magnitude(&img);
            let scale = slow.iter().cloned().fold(0.0f64, f64::max).max(1.0);
            let err = fast.data.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            worst = worst.max(err);
        }
    }
    outcome(worst <= DFT_REL_TOL, format!("max relative error {worst:.2e} over all sizes up to {DFT_MAX_SIDE}x{DFT_MAX_SIDE}"))
}

fn stage_two_oracle() -> Outcome {
    let mut r = rng(13);
    let mut hist_ok = 0;
    for _ in 0..HIST_IMAGES {
        let (w, h) = (r.gen_range(1..80), r.gen_range(1..80));
        let density: f64 = r.gen();
        let img = BinaryImage::from_fn(w, h, |_, _| r.gen_bool(density));
        let (hx, hy) = axis_histograms(&img);
        let bx: Vec<u32> = (0..w).map(|x| (0..h).filter(|&y| img.get(x, y)).count() as u32).collect();
        // H_y counts rows from the bottom.
        let by: Vec<u32> = (0..h).map(|k| (0..w).filter(|&x| img.get(x, h - 1 - k)).count() as u32).collect();
        hist_ok += (hx == bx && hy == by) as usize;
    }
    let cfg = ScreenConfig::default();
    let (w, h) = (320, 240);
    let mut crop_ok = 0;
    let mut worst_cov = 1.0f64;
    let mut worst_area = 0.0f64;
    for i in 0..SCREEN_TEXT_FRAMES {
        let t = synth::text_block_frame(2000 + i as u64, w, h, None);
        let d = screen_frame(&t.frame, &cfg).expect("rgb frame");
        if let Verdict::AcceptCrop { rect } = d.verdict {
            let px = rect.to_pixel_rect(h);
            let strokes = t.strokes.count_ones() as f64;
            let inside = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| t.strokes.get(x, y) && px.contains(x, y)).count() as f64;
            let cov = inside / strokes;
            let area = px.area() as f64 / (w * h) as f64;
            worst_cov = worst_cov.min(cov);
            worst_area = worst_area.max(area);
            crop_ok += (cov >= SCREEN_COVERAGE_MIN && area <= SCREEN_AREA_MAX) as usize;
        } else {
            worst_cov = 0.0;
        }
    }
    let mut blank_rejected = 0;
    for i in 0..SCREEN_BLANK_FRAMES {
        let g = (i * 13) as u8;
        let f = synth::blank_frame(w, h, [g, 255 - g, g / 2]);
        blank_rejected += screen_frame(&f, &cfg).expect("rgb frame").is_reject() as usize;
    }
    let pass = hist_ok == HIST_IMAGES && crop_ok == SCREEN_TEXT_FRAMES && blank_rejected == SCREEN_BLANK_FRAMES;
    outcome(
        pass,
        format!(
            "histograms {hist_ok}/{HIST_IMAGES}, crops {crop_ok}/{SCREEN_TEXT_FRAMES} (worst coverage {:.1}%, worst area {:.1}%), blanks rejected {blank_rejected}/{SCREEN_BLANK_FRAMES}",
            worst_cov * 100.0,
            worst_area * 100.0
        ),
    )
}

fn homography_trial(trial: u64) -> f64 {
    let mut r = rng(14_000 + trial);
    let src = synth::textured_frame(3000 + trial, H_SIZE, H_SIZE);
    let c = H_SIZE as f64 / 2.0;
    let angle = r.gen_range(-10.0f64..=10.0).to_radians();
    let scale = r.gen_range(0.9..=1.1);
    let t = loop {
        let t: Point = [r.gen_range(-20.0..=20.0), r.gen_range(-20.0..=20.0)];
        if t[0].hypot(t[1]) <= 20.0 {
            break t;
        }
    };
    let truth = Homography::similarity(angle, scale, [c, c], t);
    let inv = truth.inverse().expect("similarity is invertible");
    let dst = synth::warp_frame(&src, H_SIZE, H_SIZE, |x, y| inv.apply([x, y]).ok().map(|p| (p[0], p[1])));
    let params = SiftParams::default();
    let a = detect_and_describe(&to_grayscale(&src), &params);
    let b = detect_and_describe(&to_grayscale(&dst), &params);
    let m = match_descriptors(&a.descriptors, &b.descriptors, 0.75);
    let mut sp: Vec<Point> = m.iter().map(|x| [a.keypoints[x.src].x as f64, a.keypoints[x.src].y as f64]).collect();
    let mut dp: Vec<Point> = m.iter().map(|x| [b.keypoints[x.dst].x as f64, b.keypoints[x.dst].y as f64]).collect();
    let outliers = ((sp.len() as f64) * H_OUTLIER_FRACTION / (1.0 - H_OUTLIER_FRACTION)).round() as usize;
    for _ in 0..outliers {
        let s = H_SIZE as f64;
        sp.push([r.gen_range(0.0..s), r.gen_range(0.0..s)]);
        dp.push([r.gen_range(0.0..s), r.gen_range(0.0..s)]);
    }
    let ransac = RansacParams { seed: trial, ..RansacParams::default() };
    let Ok((h, _)) = estimate_homography(&sp, &dp, &ransac) else { return f64::INFINITY };
    let (lo, hi) = (c - 128.0, c + 128.0);
    [[lo, lo], [hi, lo], [hi, hi], [lo, hi]]
        .iter()
        .map(|&p| match (h.apply(p), truth.apply(p)) {
            (Ok(a), Ok(b)) => (a[0] - b[0]).hypot(a[1] - b[1]),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn homography_recovery() -> Outcome {
    use rayon::prelude::*;
    let start = Instant::now();
    let errs: Vec<f64> = (0..H_TRIALS as u64).into_par_iter().map(homography_trial).collect();
    let elapsed = start.elapsed();
    let ok = errs.iter().filter(|&&e| e <= H_CORNER_TOL).count();
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    let pass = ok as f64 / H_TRIALS as f64 >= H_PASS_MIN && elapsed < H_BUDGET;
    outcome(pass, format!("{ok}/{H_TRIALS} within {H_CORNER_TOL}px (median {:.3}px), {elapsed:.1?}", sorted[H_TRIALS / 2]))
}

fn propagation_drift() -> Outcome {
    let seq = synth::pan_sequence(15, DRIFT_FRAMES, 320, 240, (2.0, 1.0));
    let seed = Quad::from_rect(100.0, 90.0, 90.0, 40.0).expect("valid rect");
    let p = propagate_annotations(&seq.frames, &[seed], &PropagateParams::default(), |_, _| {}).expect("seeded");
    let truth = |i: usize| {
        let (ox, oy) = seq.offsets[i];
        seed.translated(-(ox - seq.offsets[0].0), -(oy - seq.offsets[0].1))
    };
    // Per-frame error: the step's corner displacement against the true one.
    let mut worst_step = 0.0f64;
    let mut worst_abs = 0.0f64;
    for i in 1..p.quads.len() {
        let (t0, t1) = (truth(i - 1).corners()[0], truth(i).corners()[0]);
        let moved = p.quads[i - 1][0].translated(t1[0] - t0[0], t1[1] - t0[1]);
        worst_step = worst_step.max(p.quads[i][0].max_corner_distance(&moved));
        worst_abs = worst_abs.max(p.quads[i][0].max_corner_distance(&truth(i)));
    }
    let complete = p.quads.len() == DRIFT_FRAMES && p.halted_at.is_none();
    let total = if complete { p.quads[DRIFT_FRAMES - 1][0].max_corner_distance(&truth(DRIFT_FRAMES - 1)) } else { f64::INFINITY };

    let mut frames = synth::pan_sequence(16, 10, 320, 240, (2.0, 0.0)).frames;
    frames.push(synth::textured_frame(4242, 320, 240));
    frames.extend(synth::pan_sequence(17, 5, 320, 240, (2.0, 0.0)).frames);
    let cut = propagate_annotations(&frames, &[seed], &PropagateParams::default(), |_, _| {}).expect("seeded");
    let halted = cut.halted_at == Some(10) && matches!(cut.diagnostics.last().map(|d| &d.status), Some(StepStatus::PropagationFailed { .. }));

    let pass = complete && worst_step < DRIFT_STEP_TOL && total < DRIFT_TOTAL_TOL && halted;
    outcome(pass, format!("worst per-frame error {worst_step:.3}px (worst absolute {worst_abs:.3}px), cumulative {total:.3}px at frame {DRIFT_FRAMES}, cut halted at {:?} (expected Some(10))", cut.halted_at))
}

fn separable_points(seed: u64, n: usize) -> (Vec<FeatureVector>, Vec<i8>) {
    // True boundary x + 2y = 1; points closer than the margin are redrawn.
    let (w, b) = ([1.0f64, 2.0], -1.0f64);
    let norm = w[0].hypot(w[1]);
    let mut r = rng(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    while xs.len() < n {
        let p = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
        let d = (w[0] * p[0] + w[1] * p[1] + b) / norm;
        if d.abs() < SVM_MARGIN / 2.0 {
            continue;
        }
        xs.push(FeatureVector(p.to_vec()));
        ys.push(if d > 0.0 { 1 } else { -1 });
    }
    (xs, ys)
}

fn accuracy(model: &e2vts_core::ood::SvmModel, xs: &[FeatureVector], ys: &[i8]) -> f64 {
    let ok = xs.iter().zip(ys).filter(|(x, &y)| (svm_predict(model, x).expect("dims match") == OodLabel::InDistribution) == (y > 0)).count();
    ok as f64 / xs.len() as f64
}

fn svm_separable() -> Outcome {
    let (xs, ys) = separable_points(21, SVM_POINTS);
    let (hx, hy) = separable_points(22, SVM_POINTS);
    let params = SvmParams { seed: 5, ..SvmParams::default() };
    let a = svm_train(&xs, &ys, "raw-2d", params).expect("two classes");
    let b = svm_train(&xs, &ys, "raw-2d", params).expect("two classes");
    let same = a.to_json().unwrap() == b.to_json().unwrap()
        && a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.bias.to_bits() == b.bias.to_bits();
    let (train, held) = (accuracy(&a, &xs, &ys), accuracy(&a, &hx, &hy));
    let pass = train == 1.0 && held >= SVM_HELDOUT_MIN && same;
    outcome(pass, format!("train {:.1}%, held-out {:.1}%, retrain bit-identical: {same}", train * 100.0, held * 100.0))
}

fn dp_edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + (a[i - 1] != b[j - 1]) as usize;
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn random_convex_quad(r: &mut ChaCha8Rng, center: Point) -> Quad {
    loop {
        let (rx, ry) = (r.gen_range(5.0..25.0), r.gen_range(5.0..25.0));
        let rot: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let mut angles: Vec<f64> = (0..4).map(|_| r.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<Point> = angles
            .iter()
            .map(|&t| {
                let (x, y) = (rx * t.cos(), ry * t.sin());
                [center[0] + x * rot.cos() - y * rot.sin(), center[1] + x * rot.sin() + y * rot.cos()]
            })
            .collect();
        if let Ok(q) = Quad::new([pts[0], pts[1], pts[2], pts[3]]) {
            if polygon_overlap(&q, &q).is_ok() {
                return q;
            }
        }
    }
}

fn inside_convex(q: &Quad, p: Point) -> bool {
    let c = q.corners();
    let mut sign = 0.0f64;
    for i in 0..4 {
        let (a, b) = (c[i], c[(i + 1) % 4]);
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross != 0.0 {
            if sign != 0.0 && cross.signum() != sign {
                return false;
            }
            sign = cross.signum();
        }
    }
    true
}

fn raster_iou(a: &Quad, b: &Quad) -> f64 {
    // Pixel centres of a IOU_RASTER^2 grid over [0, 100]^2, which holds every generated quad.
    let cell = 100.0 / IOU_RASTER as f64;
    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..IOU_RASTER {
        let y = (j as f64 + 0.5) * cell;
        for i in 0..IOU_RASTER {
            let p = [(i as f64 + 0.5) * cell, y];
            let (ia, ib) = (inside_convex(a, p), inside_convex(b, p));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 { 0.0 } else { inter as f64 / union as f64 }
}

fn metrics_oracles() -> Outcome {
    let mut r = rng(31);
    let alphabet: Vec<char> = "abcdeXYZ01 éß漢".chars().collect();
    let word = |r: &mut ChaCha8Rng| -> String { (0..r.gen_range(0..12)).map(|_| alphabet[r.gen_range(0..alphabet.len())]).collect() };
    let edits_ok = (0..EDIT_PAIRS)
        .filter(|_| {
            let (a, b) = (word(&mut r), word(&mut r));
            edit_distance(&a, &b) == dp_edit_distance(&a, &b)
        })
        .count();

    let mut worst = 0.0f64;
    for _ in 0..IOU_PAIRS {
        let c: Point = [r.gen_range(40.0..60.0), r.gen_range(40.0..60.0)];
        let a = random_convex_quad(&mut r, c);
        let shifted = [c[0] + r.gen_range(-15.0..15.0), c[1] + r.gen_range(-15.0..15.0)];
        let b = random_convex_quad(&mut r, shifted);
        let exact = polygon_overlap(&a, &b).map(|o| o.iou).unwrap_or(f64::NAN);
        worst = worst.max((exact - raster_iou(&a, &b)).abs());
    }

    let g = Quad::from_rect(0.0, 0.0, 1.0, 1.0).unwrap();
    let p = Quad::from_rect(0.5, 0.0, 1.0, 1.0).unwrap();
    let o = polygon_overlap(&p, &g).expect("convex");
    let analytic = o.iou == 1.0 / 3.0 && o.iop == 0.5 && o.iog == 0.5;

    let pass = edits_ok == EDIT_PAIRS && worst <= IOU_TOL && analytic;
    outcome(
        pass,
        format!("edit distance {edits_ok}/{EDIT_PAIRS}, max IoU deviation {worst:.2e}, analytic case ({}, {}, {})", o.iou, o.iop, o.iog),
    )
}

fn ood_training_frames(w: usize, h: usize, seeds: u64) -> (Vec<Frame>, Vec<Frame>) {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for s in 0..seeds {
        let t = synth::text_block_frame(500 + s, w, h, None).frame;
        pos.push(synth::blur_frame(&t, 2.5));
        neg.push(synth::blur_frame(&t, 6.0));
        pos.push(t);
        neg.push(synth::blur_frame(&synth::textured_frame(900 + s, w, h), 6.0));
        let g = (s * 6) as u8;
        neg.push(synth::blank_frame(w, h, [g, g, g]));
    }
    (pos, neg)
}

fn pipeline_efficiency() -> Outcome {
    let (w, h) = (320, 240);
    let video = synth::synthetic_video(1, VIDEO_FRAMES, 24, 16, w, h);
    let base = PipelineConfig { spotter: SpotterConfig { cost_ms: SPOT_COST_MS, ..SpotterConfig::default() }, seed: 3, ..PipelineConfig::default() };
    let extractor = EdgeDensityGrid { screen: base.screen, ..Default::default() };
    let (pos, neg) = ood_training_frames(w, h, 40);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (frames, y) in [(&pos, 1i8), (&neg, -1i8)] {
        for f in frames {
            xs.push(extractor.extract(f).expect("rgb frame"));
            ys.push(y);
        }
    }
    let model = svm_train(&xs, &ys, &extractor.id(), SvmParams::default()).expect("two classes");
    let source = e2vts_core::io::MemorySource::new(video.frames.clone());
    let spotter = MockSpotter::new(&base.spotter, None, base.seed);

    let staged = run_pipeline(&source, &base, Some(&model), &spotter).expect("valid config");
    let all = PipelineConfig { stages: StageToggles { quality: false, screen: false, ood: false }, ..base.clone() };
    let everything = run_pipeline(&source, &all, None, &spotter).expect("valid config");

    let spotted: Vec<usize> = staged.trace.spotted().map(|f| f.index).collect();
    let mut scenes: Vec<usize> = spotted.iter().filter_map(|&i| video.kinds[i].scene()).collect();
    scenes.sort();
    scenes.dedup();
    let frac = spotted.len() as f64 / VIDEO_FRAMES as f64;
    let reached = scenes.len() as f64 / video.scene_count as f64;
    let (cpu, cpu_all) = (staged.metrics.total().cpu_ns, everything.metrics.total().cpu_ns);
    let all_spotted = everything.trace.frames.iter().filter(|f| matches!(f.fate, Fate::Spotted { .. })).count();
    let pass = frac <= SPOT_FRACTION_MAX && reached >= SCENES_REACHED_MIN && cpu < cpu_all && all_spotted == VIDEO_FRAMES;
    outcome(
        pass,
        format!(
            "spotter on {}/{VIDEO_FRAMES} frames ({:.1}%), scenes reached {}/{}, CPU I+II+III {:.0} ms ({}) vs spot-all {:.0} ms",
            spotted.len(),
            frac * 100.0,
            scenes.len(),
            video.scene_count,
            cpu as f64 / 1e6,
            Stage::ALL.iter().map(|&st| format!("{st:?} {:.0}", staged.metrics.get(st).cpu_ns as f64 / 1e6)).collect::<Vec<_>>().join(", "),
            cpu_all as f64 / 1e6
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_e2vts")).args(args).output().expect("binary runs")
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let d = tmp.path();
    let (w, h) = (320, 240);
    let video = synth::synthetic_video(2, 60, 12, 6, w, h);
    write_frame_dir(&d.join("frames"), &video.frames).unwrap();
    let (pos, neg) = ood_training_frames(w, h, 10);
    write_frame_dir(&d.join("pos"), &pos).unwrap();
    write_frame_dir(&d.join("neg"), &neg).unwrap();
    let mut doc = AnnotationDocument::default();
    for i in 0..video.frames.len() {
        let quad = Quad::from_rect(100.0, 90.0, 120.0, 60.0).unwrap();
        doc.set_frame(i, vec![Annotation { track_id: 1, quad, label: Some("TEXT".into()), source: Source::Human, transcription: None }]);
    }
    std::fs::write(d.join("gt.json"), doc.to_json().unwrap()).unwrap();
    let model = d.join("model.json");
    let config = d.join("run.conf");
    std::fs::write(
        &config,
        format!(
            "seed = 7\npipeline.ood_model = {}\nspotter.mode = echo\nspotter.noise_px = 2\nspotter.annotations = {}\n",
            model.display(),
            d.join("gt.json").display()
        ),
    )
    .unwrap();
    let p = |x: &str| d.join(x).display().to_string();
    let train = run_cli(&["train-ood", "--pos", &p("pos"), "--neg", &p("neg"), "--out", &p("model.json")]);
    if !train.status.success() {
        return outcome(false, format!("train-ood failed: {}", String::from_utf8_lossy(&train.stderr)));
    }
    let mut outputs = Vec::new();
    for run in 0..2 {
        let (trace, metrics) = (p(&format!("trace{run}.json")), p(&format!("metrics{run}.json")));
        let out = run_cli(&["process", "--frames", &p("frames"), "--config", &p("run.conf"), "--trace", &trace, "--metrics", &metrics]);
        if !out.status.success() {
            return outcome(false, format!("process failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push((std::fs::read(trace).unwrap(), std::fs::read(metrics).unwrap()));
    }
    let same = outputs[0] == outputs[1];
    let nonempty = Path::new(&p("trace0.json")).metadata().map(|m| m.len() > 0).unwrap_or(false);
    outcome(same && nonempty, format!("trace {} bytes, metrics {} bytes, byte-identical: {same}", outputs[0].0.len(), outputs[0].1.len()))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("blur-ordering", blur_ordering),
        ("dft-oracle", dft_oracle),
        ("stage-two-oracle", stage_two_oracle),
        ("homography-recovery", homography_recovery),
        ("propagation-drift", propagation_drift),
        ("svm-separable", svm_separable),
        ("metrics-oracles", metrics_oracles),
        ("pipeline-efficiency", pipeline_efficiency),
        ("cli-determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!("{} {name}: {} [{:.1?}]", if result.pass { "PASS" } else { "FAIL" }, result.detail, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
