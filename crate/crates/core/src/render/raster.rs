//! Row-major rasters and their PGM/PFM encodings.
//!
//! * PGM: binary `P5`, 8 bits per pixel, top row first.
//! * PFM: grayscale `Pf`, little-endian (scale `-1.0`), 32-bit floats,
//!   bottom row first as the format requires.

use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed {format} data: {message}")]
    Format { format: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster { width, height, data: vec![value; width * height] }
    }

    /// `None` when `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Raster { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

fn fmt_err(format: &'static str, message: impl Into<String>) -> RasterError {
    RasterError::Format { format, message: message.into() }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RasterError> {
    let io = |source| RasterError::Io { path: path.display().to_string(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

fn read_file(path: &Path) -> Result<Vec<u8>, RasterError> {
    std::fs::read(path).map_err(|source| RasterError::Io { path: path.display().to_string(), source })
}

pub fn encode_pgm(r: &Raster<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", r.width, r.height).into_bytes();
    out.extend_from_slice(&r.data);
    out
}

pub fn encode_pfm(r: &Raster<f32>) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", r.width, r.height).into_bytes();
    for row in (0..r.height).rev() {
        for v in &r.data[row * r.width..(row + 1) * r.width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Split off `n` whitespace-separated header fields; the payload starts one
/// byte after the last field.
fn header(bytes: &[u8], n: usize, format: &'static str) -> Result<(Vec<String>, usize), RasterError> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < n {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(fmt_err(format, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((fields, i + 1))
}

fn dims(fields: &[String], format: &'static str) -> Result<(usize, usize), RasterError> {
    let w = fields[1].parse().map_err(|_| fmt_err(format, "bad width"))?;
    let h = fields[2].parse().map_err(|_| fmt_err(format, "bad height"))?;
    Ok((w, h))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Raster<u8>, RasterError> {
    let (f, start) = header(bytes, 4, "PGM")?;
    if f[0] != "P5" || f[3] != "255" {
        return Err(fmt_err("PGM", "expected binary P5 with maxval 255"));
    }
    let (w, h) = dims(&f, "PGM")?;
    let payload = bytes.get(start..).ok_or_else(|| fmt_err("PGM", "missing payload"))?;
    if payload.len() != w * h {
        return Err(fmt_err("PGM", format!("expected {} bytes, found {}", w * h, payload.len())));
    }
    Ok(Raster { width: w, height: h, data: payload.to_vec() })
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Raster<f32>, RasterError> {
    let (f, start) = header(bytes, 4, "PFM")?;
    if f[0] != "Pf" {
        return Err(fmt_err("PFM", "expected grayscale Pf"));
    }
    let (w, h) = dims(&f, "PFM")?;
    let scale: f32 = f[3].parse().map_err(|_| fmt_err("PFM", "bad scale"))?;
    let little = scale < 0.0;
    let payload = bytes.get(start..).ok_or_else(|| fmt_err("PFM", "missing payload"))?;
    if payload.len() != w * h * 4 {
        return Err(fmt_err("PFM", format!("expected {} bytes, found {}", w * h * 4, payload.len())));
    }
    let mut data = vec![0f32; w * h];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let b: [u8; 4] = chunk.try_into().unwrap();
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row_from_bottom, col) = (k / w, k % w);
        data[(h - 1 - row_from_bottom) * w + col] = v;
    }
    Ok(Raster { width: w, height: h, data })
}

pub fn write_pgm(path: &Path, r: &Raster<u8>) -> Result<(), RasterError> {
    write_file(path, &encode_pgm(r))
}

pub fn write_pfm(path: &Path, r: &Raster<f32>) -> Result<(), RasterError> {
    write_file(path, &encode_pfm(r))
}

pub fn read_pgm(path: &Path) -> Result<Raster<u8>, RasterError> {
    decode_pgm(&read_file(path)?)
}

pub fn read_pfm(path: &Path) -> Result<Raster<f32>, RasterError> {
    decode_pfm(&read_file(path)?)
}
