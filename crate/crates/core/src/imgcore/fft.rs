//! Exact discrete Fourier transform for arbitrary lengths.
//!
//! Lengths whose prime factors are all at most 13 use a recursive mixed-radix
//! Cooley-Tukey transform; any other length goes through Bluestein's chirp-z
//! reformulation on a padded power-of-two convolution.

use std::f64::consts::PI;

use super::{GrayImage, RealImage};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    #[inline]
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    fn cis(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { re: c, im: s }
    }

    #[inline]
    fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    #[inline]
    fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, im: self.im + o.im }
    }

    #[inline]
    fn sub(self, o: Self) -> Self {
        Self { re: self.re - o.re, im: self.im - o.im }
    }

    #[inline]
    fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }
}

enum Plan {
    Trivial,
    Mixed { factors: Vec<usize>, roots: Vec<Complex> },
    Bluestein { chirp: Vec<Complex>, kernel_fft: Vec<Complex>, inner: Box<FftPlan> },
}

const MAX_RADIX: usize = 13;

/// Radices for the mixed-radix path, fours first; `None` if a prime factor exceeds `MAX_RADIX`.
fn factorize(mut n: usize) -> Option<Vec<usize>> {
    let mut f = Vec::new();
    while n % 4 == 0 {
        f.push(4);
        n /= 4;
    }
    for p in [2, 3, 5, 7, 11, 13] {
        while n % p == 0 {
            f.push(p);
            n /= p;
        }
    }
    (n == 1).then_some(f)
}

/// Precomputed forward transform of one length.
pub struct FftPlan {
    len: usize,
    plan: Plan,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let plan = if len <= 1 {
            Plan::Trivial
        } else if let Some(factors) = factorize(len) {
            let roots = (0..len).map(|k| Complex::cis(-2.0 * PI * k as f64 / len as f64)).collect();
            Plan::Mixed { factors, roots }
        } else {
            let m = (2 * len - 1).next_power_of_two();
            let inner = Box::new(FftPlan::new(m));
            // k^2 is reduced mod 2n before scaling to keep the angle accurate.
            let modulus = 2 * len as u64;
            let chirp: Vec<Complex> = (0..len as u64)
                .map(|k| Complex::cis(-PI * ((k * k) % modulus) as f64 / len as f64))
                .collect();
            let mut kernel = vec![Complex::default(); m];
            kernel[0] = chirp[0].conj();
            for k in 1..len {
                kernel[k] = chirp[k].conj();
                kernel[m - k] = chirp[k].conj();
            }
            inner.forward(&mut kernel);
            Plan::Bluestein { chirp, kernel_fft: kernel, inner }
        };
        Self { len, plan }
    }

    /// Unnormalized forward DFT, in place.
    pub fn forward(&self, buf: &mut [Complex]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.plan {
            Plan::Trivial => {}
            Plan::Mixed { factors, roots } => {
                let input = buf.to_vec();
                mixed(&input, 1, buf, factors, roots, 1);
            }
            Plan::Bluestein { chirp, kernel_fft, inner } => {
                let m = kernel_fft.len();
                let mut a = vec![Complex::default(); m];
                for (k, (x, c)) in buf.iter().zip(chirp).enumerate() {
                    a[k] = x.mul(*c);
                }
                inner.forward(&mut a);
                for (x, b) in a.iter_mut().zip(kernel_fft) {
                    *x = x.mul(*b);
                }
                inner.inverse_unscaled(&mut a);
                let scale = 1.0 / m as f64;
                for (k, out) in buf.iter_mut().enumerate() {
                    let v = a[k].mul(chirp[k]);
                    *out = Complex::new(v.re * scale, v.im * scale);
                }
            }
        }
    }

    fn inverse_unscaled(&self, buf: &mut [Complex]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        for v in buf.iter_mut() {
            *v = v.conj();
        }
    }
}

/// Decimation in time: `out` (length n) receives the DFT of `x[0], x[stride], ...`.
/// `roots` holds the N-th roots of unity of the full length and `rs = N / n`.
fn mixed(x: &[Complex], stride: usize, out: &mut [Complex], factors: &[usize], roots: &[Complex], rs: usize) {
    let n = out.len();
    if n == 1 {
        out[0] = x[0];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for j in 0..p {
        mixed(&x[j * stride..], stride * p, &mut out[j * m..(j + 1) * m], &factors[1..], roots, rs * p);
    }
    let big = roots.len();
    // Rotation by -2*pi/p expressed through the full-length table.
    let wp = |e: usize| roots[(e % p) * (big / p)];
    let mut t = [Complex::default(); MAX_RADIX];
    for k in 0..m {
        for (j, tj) in t.iter_mut().enumerate().take(p) {
            let v = out[j * m + k];
            *tj = if j == 0 { v } else { v.mul(roots[(j * k * rs) % big]) };
        }
        match p {
            2 => {
                out[k] = t[0].add(t[1]);
                out[k + m] = t[0].sub(t[1]);
            }
            4 => {
                let (a, b) = (t[0].add(t[2]), t[0].sub(t[2]));
                let (c, d) = (t[1].add(t[3]), t[1].sub(t[3]));
                // d * (-i)
                let d = Complex::new(d.im, -d.re);
                out[k] = a.add(c);
                out[k + m] = b.add(d);
                out[k + 2 * m] = a.sub(c);
                out[k + 3 * m] = b.sub(d);
            }
            _ => {
                for q in 0..p {
                    let mut acc = t[0];
                    for (j, tj) in t.iter().enumerate().take(p).skip(1) {
                        acc = acc.add(tj.mul(wp(j * q)));
                    }
                    out[k + q * m] = acc;
                }
            }
        }
    }
}

/// Forward DFT of `buf` in place, any length.
pub fn fft_in_place(buf: &mut [Complex]) {
    FftPlan::new(buf.len()).forward(buf);
}

/// Magnitude of the unnormalized 2-D DFT. Bin `(u, v)` is stored at column `u`, row `v`.
pub fn dft2_magnitude(img: &GrayImage) -> RealImage {
    let (w, h) = (img.width, img.height);
    let mut grid = vec![Complex::default(); w * h];

    // Two real rows share one complex transform: z = a + i b.
    let row_plan = FftPlan::new(w);
    let mut z = vec![Complex::default(); w];
    for y in (0..h).step_by(2) {
        let a = &img.data[y * w..(y + 1) * w];
        let b = if y + 1 < h { Some(&img.data[(y + 1) * w..(y + 2) * w]) } else { None };
        for x in 0..w {
            z[x] = Complex::new(a[x] as f64, b.map_or(0.0, |b| b[x] as f64));
        }
        row_plan.forward(&mut z);
        for k in 0..w {
            let (zk, zn) = (z[k], z[(w - k) % w].conj());
            grid[y * w + k] = Complex::new(0.5 * (zk.re + zn.re), 0.5 * (zk.im + zn.im));
            if y + 1 < h {
                // (zk - zn) / 2i
                grid[(y + 1) * w + k] = Complex::new(0.5 * (zk.im - zn.im), -0.5 * (zk.re - zn.re));
            }
        }
    }

    // Real input: |F(u, v)| = |F(w - u, h - v)|, so half the columns suffice.
    let col_plan = FftPlan::new(h);
    let mut column = vec![Complex::default(); h];
    let mut mag = vec![0.0; w * h];
    for x in 0..=w / 2 {
        for y in 0..h {
            column[y] = grid[y * w + x];
        }
        col_plan.forward(&mut column);
        for y in 0..h {
            let m = column[y].norm();
            mag[y * w + x] = m;
            mag[((h - y) % h) * w + (w - x) % w] = m;
        }
    }

    RealImage { width: w, height: h, data: mag }
}
