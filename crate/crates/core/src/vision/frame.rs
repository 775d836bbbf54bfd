use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Grayscale image, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Size(format!("frame of {width}x{height} pixels")));
        }
        if pixels.len() != width * height {
            return Err(Error::Size(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InputDomain(format!("pixel intensity {bad} outside [0, 1]")));
        }
        Ok(Frame { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Frame::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at signed coordinates, replicating the nearest edge pixel.
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[cy * self.width + cx]
    }

    pub fn same_size(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixel-wise mean of two frames of equal size.
    pub fn midpoint(&self, other: &Frame) -> Result<Frame> {
        if !self.same_size(other) {
            return Err(Error::Size(format!(
                "{}x{} vs {}x{} frames",
                self.width, self.height, other.width, other.height
            )));
        }
        let pixels = self.pixels.iter().zip(&other.pixels).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(Frame { width: self.width, height: self.height, pixels })
    }

    /// Binary PGM (P5), 8 bits per pixel.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|p| (p * 255.0).round() as u8).collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_pgm<R: Read>(mut input: R) -> Result<Frame> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let mut pos = 0;
        let mut fields = [0usize; 3];
        let magic = next_token(&buf, &mut pos)?;
        if magic != b"P5" {
            return Err(Error::Format("not a binary PGM (P5) file".into()));
        }
        for f in fields.iter_mut() {
            let tok = next_token(&buf, &mut pos)?;
            *f = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(Error::Format(format!("only 8-bit PGM (maxval 255) is supported, got {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let raster = buf.get(pos..pos + width * height).ok_or_else(|| {
            Error::Format(format!("PGM raster shorter than {width}x{height}"))
        })?;
        Frame::new(width, height, raster.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn load_pgm(path: &Path) -> Result<Frame> {
        Frame::read_pgm(std::fs::File::open(path)?)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        self.write_pgm(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

fn next_token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&buf[start..*pos])
}

/// Per-pixel scalar values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Per-pixel 2-vectors stored as separate x and y planes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub width: usize,
    pub height: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        let k = y * self.width + x;
        [self.x[k], self.y[k]]
    }
}
