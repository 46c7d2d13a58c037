use super::BinaryImage;

/// Applies `op` over windows `[i - before, i + after]` of every row, then every column.
/// Out-of-range samples read as `fill`.
fn separable(
    img: &BinaryImage,
    (before_x, after_x): (usize, usize),
    (before_y, after_y): (usize, usize),
    fill: u8,
    any: bool,
) -> BinaryImage {
    let (w, h) = (img.width, img.height);
    let mut line = Vec::new();
    let mut prefix = Vec::new();
    let mut reduce = |src: &[u8], before: usize, after: usize, dst: &mut Vec<u8>| {
        let n = src.len();
        prefix.clear();
        prefix.push(0usize);
        for &v in src {
            prefix.push(prefix.last().unwrap() + v as usize);
        }
        dst.clear();
        for i in 0..n {
            let lo = i as isize - before as isize;
            let hi = i + after;
            let clipped = lo < 0 || hi >= n;
            let (a, b) = (lo.max(0) as usize, hi.min(n - 1));
            let ones = prefix[b + 1] - prefix[a];
            let len = b + 1 - a;
            let v = if any {
                ones > 0 || (clipped && fill == 1)
            } else {
                ones == len && !(clipped && fill == 0)
            };
            dst.push(v as u8);
        }
    };

    let mut rows = BinaryImage::new(w, h);
    for y in 0..h {
        reduce(&img.data[y * w..(y + 1) * w], before_x, after_x, &mut line);
        rows.data[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    let mut out = BinaryImage::new(w, h);
    let mut col = vec![0u8; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows.data[y * w + x];
        }
        reduce(&col, before_y, after_y, &mut line);
        for y in 0..h {
            out.data[y * w + x] = line[y];
        }
    }
    out
}

/// Dilation by a `se_w`x`se_h` rectangle anchored at `(se_w/2, se_h/2)`; outside pixels are 0.
pub fn dilate(img: &BinaryImage, se_w: usize, se_h: usize) -> BinaryImage {
    let (se_w, se_h) = (se_w.max(1), se_h.max(1));
    let (ax, ay) = (se_w / 2, se_h / 2);
    separable(img, (se_w - 1 - ax, ax), (se_h - 1 - ay, ay), 0, true)
}

/// Erosion by the same rectangle; outside pixels are 1.
pub fn erode(img: &BinaryImage, se_w: usize, se_h: usize) -> BinaryImage {
    let (se_w, se_h) = (se_w.max(1), se_h.max(1));
    let (ax, ay) = (se_w / 2, se_h / 2);
    separable(img, (ax, se_w - 1 - ax), (ay, se_h - 1 - ay), 1, false)
}

/// Morphological closing: dilation followed by erosion.
pub fn morph_close(img: &BinaryImage, se_w: usize, se_h: usize) -> BinaryImage {
    erode(&dilate(img, se_w, se_h), se_w, se_h)
}
