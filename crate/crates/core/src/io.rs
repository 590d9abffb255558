//! Field file formats: binary PGM (P5), 8-bit PNG, and a raw little-endian f32
//! container (`TWSF` magic, `u32` width, `u32` height, `u32` reserved, then
//! `width * height` samples row-major).
//!
//! 8-bit data maps to `[0, 1]` by `value / 255` on load and by
//! `round(clamp(v, 0, 1) * 255)` on save. Raw f32 data is taken verbatim.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

pub const RAW_MAGIC: &[u8; 4] = b"TWSF";
const RAW_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldFormat {
    Pgm,
    Png,
    RawF32,
}

impl FieldFormat {
    /// Guesses the format from a file extension (`pgm`, `png`, `f32`/`raw`/`twsf`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(Self::Pgm),
            "png" => Some(Self::Png),
            "f32" | "raw" | "twsf" => Some(Self::RawF32),
            _ => None,
        }
    }
}

pub fn load_field(path: impl AsRef<Path>, format: FieldFormat) -> Result<ScalarField> {
    let path = path.as_ref();
    match format {
        FieldFormat::Pgm => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_pgm(&bytes).map_err(|reason| Error::malformed(path, "PGM", reason))
        }
        FieldFormat::Png => {
            let img = image::open(path).map_err(|source| match source {
                image::ImageError::IoError(e) => Error::io(path, e),
                source => Error::Image {
                    path: path.to_path_buf(),
                    source,
                },
            })?;
            let gray = img.to_luma8();
            let (w, h) = gray.dimensions();
            let values = gray.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
            ScalarField::from_vec(w as usize, h as usize, values)
                .map_err(|e| Error::malformed(path, "PNG", e.to_string()))
        }
        FieldFormat::RawF32 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_raw(&bytes).map_err(|reason| Error::malformed(path, "raw-f32", reason))
        }
    }
}

/// Convenience wrapper that picks the format from the extension.
pub fn load_field_auto(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let format = FieldFormat::from_path(path)
        .ok_or_else(|| Error::malformed(path, "field", "unknown extension (expected .pgm, .png or .f32)"))?;
    load_field(path, format)
}

pub fn save_field(field: &ScalarField, path: impl AsRef<Path>, format: FieldFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        FieldFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", field.width(), field.height()).into_bytes();
            out.extend(field.values().iter().map(|&v| to_byte(v)));
            out
        }
        FieldFormat::Png => {
            let pixels: Vec<u8> = field.values().iter().map(|&v| to_byte(v)).collect();
            let img = image::GrayImage::from_raw(field.width() as u32, field.height() as u32, pixels)
                .expect("buffer length matches dimensions");
            return img
                .save_with_format(path, image::ImageFormat::Png)
                .map_err(|source| match source {
                    image::ImageError::IoError(e) => Error::io(path, e),
                    source => Error::Image {
                        path: path.to_path_buf(),
                        source,
                    },
                });
        }
        FieldFormat::RawF32 => encode_raw(field),
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn save_field_auto(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = FieldFormat::from_path(path)
        .ok_or_else(|| Error::malformed(path, "field", "unknown extension (expected .pgm, .png or .f32)"))?;
    save_field(field, path, format)
}

#[inline]
fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<ScalarField, String> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    if magic != b"P5" {
        return Err(format!("expected magic P5, found {:?}", String::from_utf8_lossy(magic)));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| format!("missing {name}"))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("invalid {name} {:?}", String::from_utf8_lossy(tok)))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval} (8-bit only)"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing whitespace after maxval".into());
    }
    pos += 1;
    let data = &bytes[pos..];
    if data.len() != width * height {
        return Err(format!(
            "dimension mismatch: header says {width}x{height} = {} bytes, found {}",
            width * height,
            data.len()
        ));
    }
    let scale = maxval as f64;
    let values = data.iter().map(|&b| (f64::from(b) / scale).min(1.0)).collect();
    ScalarField::from_vec(width, height, values).map_err(|e| e.to_string())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn encode_raw(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + 4 * field.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &v in field.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn decode_raw(bytes: &[u8]) -> std::result::Result<ScalarField, String> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err("truncated header".into());
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err("bad magic (expected TWSF)".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height) = (word(4), word(8));
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    let body = &bytes[RAW_HEADER_LEN..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or("dimensions overflow")?;
    if body.len() != expected {
        return Err(format!(
            "dimension mismatch: header says {width}x{height}, payload has {} bytes",
            body.len()
        ));
    }
    let mut values = Vec::with_capacity(width * height);
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format!("non-finite sample at row {}, col {}", i / width, i % width));
        }
        values.push(f64::from(v));
    }
    ScalarField::from_vec(width, height, values).map_err(|e| e.to_string())
}
