use super::GrayImage;

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &GrayImage, new_w: usize, new_h: usize) -> GrayImage {
    let (new_w, new_h) = (new_w.max(1), new_h.max(1));
    if new_w == img.width && new_h == img.height {
        return img.clone();
    }
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    let sample_axis = |dst: usize, scale: f64, len: usize| {
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };
    let cols: Vec<_> = (0..new_w).map(|x| sample_axis(x, sx, img.width)).collect();
    let mut data = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let (y0, y1, fy) = sample_axis(y, sy, img.height);
        let (r0, r1) = (&img.data[y0 * img.width..(y0 + 1) * img.width], &img.data[y1 * img.width..(y1 + 1) * img.width]);
        data.extend(cols.iter().map(|&(x0, x1, fx)| {
            let top = r0[x0] as f64 * (1.0 - fx) + r0[x1] as f64 * fx;
            let bottom = r1[x0] as f64 * (1.0 - fx) + r1[x1] as f64 * fx;
            (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
        }));
    }
    GrayImage { width: new_w, height: new_h, data }
}

/// Downscales so the longer side is at most `max_side`, preserving aspect ratio.
///
/// Large reductions are box-averaged by an integer factor first so the final
/// bilinear step never skips source pixels.
pub fn thumbnail(img: &GrayImage, max_side: usize) -> GrayImage {
    let longest = img.width.max(img.height);
    if longest <= max_side {
        return img.clone();
    }
    let scale = max_side as f64 / longest as f64;
    let target_w = ((img.width as f64 * scale).round() as usize).clamp(1, max_side);
    let target_h = ((img.height as f64 * scale).round() as usize).clamp(1, max_side);

    let factor = (longest / max_side).max(1);
    let pre = if factor >= 2 { box_downsample(img, factor) } else { img.clone() };
    resize_bilinear(&pre, target_w, target_h)
}

fn box_downsample(img: &GrayImage, factor: usize) -> GrayImage {
    let w = (img.width / factor).max(1);
    let h = (img.height / factor).max(1);
    GrayImage::from_fn(w, h, |x, y| {
        let mut sum = 0u32;
        let mut n = 0u32;
        for yy in y * factor..((y + 1) * factor).min(img.height) {
            for xx in x * factor..((x + 1) * factor).min(img.width) {
                sum += img.get(xx, yy) as u32;
                n += 1;
            }
        }
        ((sum as f64 / n as f64).round()) as u8
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let img = GrayImage::from_fn(5, 4, |x, y| (x * 40 + y * 3) as u8);
        assert_eq!(resize_bilinear(&img, 5, 4), img);
    }

    #[test]
    fn checkerboard_to_single_pixel() {
        let img = GrayImage::from_vec(2, 2, vec![0, 255, 255, 0]).unwrap();
        assert_eq!(resize_bilinear(&img, 1, 1).data, vec![128]);
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(13, 7, 42);
        for (w, h) in [(1, 1), (26, 3), (5, 40)] {
            assert!(resize_bilinear(&img, w, h).data.iter().all(|&v| v == 42));
        }
        assert!(thumbnail(&GrayImage::filled(1000, 300, 42), 256).data.iter().all(|&v| v == 42));
    }

    #[test]
    fn thumbnail_bounds_longest_side() {
        let t = thumbnail(&GrayImage::new(1920, 1080), 256);
        assert_eq!((t.width, t.height), (256, 144));
        let t = thumbnail(&GrayImage::new(100, 80), 256);
        assert_eq!((t.width, t.height), (100, 80));
    }
}
