//! Netpbm graymap codec: binary (P5) and ASCII (P2) input, binary output.

use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

/// Largest accepted `width * height`.
pub const MAX_PIXELS: usize = 1 << 28;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.buf.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.buf.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len()
            && !self.buf[self.pos].is_ascii_whitespace()
            && self.buf[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.buf[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let line = self.line;
        let tok = self
            .token()
            .ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::parse(
                    line,
                    format!("invalid {what}: {:?}", String::from_utf8_lossy(tok)),
                )
            })
    }
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor {
        buf: bytes,
        pos: 0,
        line: 1,
    };
    let magic = cur.token().ok_or_else(|| Error::parse(1, "empty file"))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::parse(
                1,
                format!(
                    "unsupported magic {:?}, expected P5 or P2",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(cur.line, "zero image dimension"));
    }
    let count = width
        .checked_mul(height)
        .filter(|&c| c <= MAX_PIXELS)
        .ok_or_else(|| Error::parse(cur.line, format!("image too large: {width}x{height}")))?;
    if !(1..=65535).contains(&maxval) {
        return Err(Error::parse(
            cur.line,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    let scale = 1.0 / maxval as f64;

    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::parse(cur.line, "missing whitespace after maxval")),
        }
        let bpp = if maxval > 255 { 2 } else { 1 };
        let raster = &bytes[cur.pos..];
        if raster.len() < count * bpp {
            return Err(Error::parse(
                cur.line,
                format!(
                    "raster truncated: need {} bytes, found {}",
                    count * bpp,
                    raster.len()
                ),
            ));
        }
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let v = if bpp == 1 {
                raster[i] as usize
            } else {
                ((raster[2 * i] as usize) << 8) | raster[2 * i + 1] as usize
            };
            if v > maxval {
                return Err(Error::parse(
                    cur.line,
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            out.push(v as f64 * scale);
        }
        out
    } else {
        let mut out = Vec::with_capacity(count.min(bytes.len() / 2 + 1));
        for _ in 0..count {
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::parse(
                    cur.line,
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            out.push(v as f64 * scale);
        }
        out
    };
    GrayImage::new(width, height, pixels)
}

/// Binary PGM with maxval 255; pixels are rounded to the nearest level.
pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.pixels()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write(img: &GrayImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}
