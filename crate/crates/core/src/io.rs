//! Frame decoding and encoding: PNG, binary PPM, numbered image directories
//! and 8-bit 4:2:0 Y4M streams.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::imgcore::{yuv_to_rgb, Frame, GrayImage};

fn decode_err(path: &Path, reason: impl ToString) -> Error {
    Error::Decode { path: path.to_path_buf(), reason: reason.to_string() }
}

/// Decodes a PNG or PPM (P6) file. Grayscale inputs stay single-channel.
pub fn read_frame(path: &Path, index: usize) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| decode_err(path, e))?;
    decode_frame(&bytes, index).map_err(|e| match e {
        Error::Decode { reason, .. } => decode_err(path, reason),
        other => other,
    })
}

pub fn decode_frame(bytes: &[u8], index: usize) -> Result<Frame> {
    let img = image::load_from_memory(bytes).map_err(|e| decode_err(Path::new("<memory>"), e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Frame::new(index, w, h, 1, buf.into_raw()),
        other => Frame::new(index, w, h, 3, other.into_rgb8().into_raw()),
    }
}

fn image_buffer(frame: &Frame) -> DynamicImage {
    let (w, h) = (frame.width as u32, frame.height as u32);
    if frame.channels == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, frame.pixels.clone()).expect("frame invariant"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, frame.pixels.clone()).expect("frame invariant"))
    }
}

/// Encodes a frame as PNG bytes.
pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    image_buffer(frame)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(out.into_inner())
}

/// Writes a frame; the format follows the extension (`.png` or `.ppm`).
pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "ppm" {
        let rgb = frame.to_rgb();
        let mut bytes = format!("P6\n{} {}\n255\n", rgb.width, rgb.height).into_bytes();
        bytes.extend_from_slice(&rgb.pixels);
        fs::write(path, bytes)?;
    } else {
        fs::write(path, encode_png(frame)?)?;
    }
    Ok(())
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    write_frame(path, &Frame::from_gray(0, img.clone()))
}

/// Random-access source of frames. Loading may fail per frame.
pub trait FrameSource: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads the frame at `position`; the returned frame's index equals `position`.
    fn load(&self, position: usize) -> Result<Frame>;
}

/// Frames already in memory.
pub struct MemorySource {
    frames: Vec<Result<Frame, String>>,
}

impl MemorySource {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self { frames: frames.into_iter().map(Ok).collect() }
    }

    /// Builds a source where some positions fail to decode.
    pub fn with_failures(frames: Vec<Result<Frame, String>>) -> Self {
        Self { frames }
    }
}

impl FrameSource for MemorySource {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn load(&self, position: usize) -> Result<Frame> {
        match self.frames.get(position) {
            Some(Ok(f)) => Ok(Frame { index: position, ..f.clone() }),
            Some(Err(reason)) => Err(decode_err(Path::new(&format!("<memory:{position}>")), reason)),
            None => Err(Error::InvalidArgument(format!("frame {position} out of range"))),
        }
    }
}

/// A directory of numerically named `.png` / `.ppm` files, ordered by number.
pub struct DirSource {
    files: Vec<PathBuf>,
    fps: f64,
}

impl DirSource {
    pub fn open(dir: &Path) -> Result<Self> {
        let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !matches!(ext.as_deref(), Some("png" | "ppm")) {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            let digits: String = stem.chars().rev().take_while(char::is_ascii_digit).collect();
            if digits.is_empty() {
                continue;
            }
            let n: u64 = digits.chars().rev().collect::<String>().parse().unwrap_or(u64::MAX);
            numbered.push((n, path));
        }
        numbered.sort();
        Ok(Self { files: numbered.into_iter().map(|(_, p)| p).collect(), fps: 30.0 })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }
}

impl FrameSource for DirSource {
    fn len(&self) -> usize {
        self.files.len()
    }

    fn load(&self, position: usize) -> Result<Frame> {
        let path = self
            .files
            .get(position)
            .ok_or_else(|| Error::InvalidArgument(format!("frame {position} out of range")))?;
        Ok(read_frame(path, position)?.with_timestamp(position as f64 / self.fps))
    }
}

/// Parsed 8-bit 4:2:0 Y4M stream, frames converted to RGB on load.
pub struct Y4mSource {
    width: usize,
    height: usize,
    fps: f64,
    planes: Vec<Vec<u8>>,
}

impl Y4mSource {
    pub fn open(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        Self::parse(BufReader::new(file)).map_err(|e| match e {
            Error::Decode { reason, .. } => decode_err(path, reason),
            other => other,
        })
    }

    pub fn parse<R: BufRead>(mut reader: R) -> Result<Self> {
        let bad = |r: &str| decode_err(Path::new("<y4m>"), r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut tokens = header.split_ascii_whitespace();
        if tokens.next() != Some("YUV4MPEG2") {
            return Err(bad("missing YUV4MPEG2 signature"));
        }
        let (mut width, mut height, mut fps) = (0usize, 0usize, 30.0f64);
        for tok in tokens {
            let (tag, val) = tok.split_at(1);
            match tag {
                "W" => width = val.parse().map_err(|_| bad("bad width"))?,
                "H" => height = val.parse().map_err(|_| bad("bad height"))?,
                "F" => {
                    if let Some((n, d)) = val.split_once(':') {
                        let (n, d): (f64, f64) = (n.parse().unwrap_or(30.0), d.parse().unwrap_or(1.0));
                        if d > 0.0 {
                            fps = n / d;
                        }
                    }
                }
                "C" if !val.starts_with("420") => return Err(bad("only 4:2:0 chroma is supported")),
                _ => {}
            }
        }
        if width == 0 || height == 0 {
            return Err(bad("missing frame dimensions"));
        }
        let frame_len = width * height + 2 * width.div_ceil(2) * height.div_ceil(2);
        let mut planes = Vec::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            if !line.starts_with("FRAME") {
                return Err(bad("expected FRAME marker"));
            }
            let mut buf = vec![0u8; frame_len];
            reader.read_exact(&mut buf).map_err(|_| bad("truncated frame"))?;
            planes.push(buf);
        }
        Ok(Self { width, height, fps, planes })
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl FrameSource for Y4mSource {
    fn len(&self) -> usize {
        self.planes.len()
    }

    fn load(&self, position: usize) -> Result<Frame> {
        let raw = self
            .planes
            .get(position)
            .ok_or_else(|| Error::InvalidArgument(format!("frame {position} out of range")))?;
        let (w, h) = (self.width, self.height);
        let cw = w.div_ceil(2);
        let (y_plane, chroma) = raw.split_at(w * h);
        let (u_plane, v_plane) = chroma.split_at(cw * h.div_ceil(2));
        let mut pixels = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let c = (y / 2) * cw + x / 2;
                pixels.extend_from_slice(&yuv_to_rgb(y_plane[y * w + x], u_plane[c], v_plane[c]));
            }
        }
        Ok(Frame::from_rgb(position, w, h, pixels)?.with_timestamp(position as f64 / self.fps))
    }
}

/// Encodes RGB frames as a 4:2:0 Y4M stream (chroma averaged over 2x2 blocks).
pub fn encode_y4m(frames: &[Frame], fps: u32) -> Result<Vec<u8>> {
    let first = frames.first().ok_or_else(|| Error::InvalidArgument("no frames".into()))?;
    let (w, h) = (first.width, first.height);
    let mut out = format!("YUV4MPEG2 W{w} H{h} F{fps}:1 Ip A1:1 C420jpeg\n").into_bytes();
    for f in frames {
        if (f.width, f.height) != (w, h) {
            return Err(Error::InvalidArgument("frames differ in size".into()));
        }
        let [y, u, v] = crate::imgcore::rgb_to_yuv(&f.to_rgb())?;
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(&y.data);
        for plane in [&u, &v] {
            for cy in 0..h.div_ceil(2) {
                for cx in 0..w.div_ceil(2) {
                    let mut sum = 0u32;
                    let mut n = 0u32;
                    for yy in 2 * cy..(2 * cy + 2).min(h) {
                        for xx in 2 * cx..(2 * cx + 2).min(w) {
                            sum += plane.get(xx, yy) as u32;
                            n += 1;
                        }
                    }
                    out.push((sum as f64 / n as f64).round() as u8);
                }
            }
        }
    }
    Ok(out)
}

/// Opens a directory of images or a `.y4m` file.
pub fn open_source(path: &Path) -> Result<Box<dyn FrameSource>> {
    if path.is_dir() {
        Ok(Box::new(DirSource::open(path)?))
    } else if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("y4m")) {
        Ok(Box::new(Y4mSource::open(path)?))
    } else {
        Err(Error::InvalidArgument(format!("{} is neither a directory nor a .y4m file", path.display())))
    }
}

/// Writes frames as `000000.png`, `000001.png`, ... into `dir`.
pub fn write_frame_dir(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        write_frame(&dir.join(format!("{i:06}.png")), f)?;
    }
    Ok(())
}
