//! Portable graymap (P2 ASCII and P5 binary) reader, 8-bit only.

use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit grayscale image, pixels row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.width + c]
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self
            .data
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        let tok = self
            .token()
            .ok_or_else(|| Error::invalid(format!("pgm: missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "pgm: bad {what} {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

pub fn parse_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { data, pos: 0 };
    let ascii = match cur.token() {
        Some(b"P2") => true,
        Some(b"P5") => false,
        _ => return Err(Error::invalid("pgm: expected magic number P2 or P5")),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::invalid("pgm: image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::invalid(format!(
            "pgm: maxval {maxval} unsupported (only 8-bit images)"
        )));
    }
    let count = usize::try_from(width)
        .ok()
        .and_then(|w| usize::try_from(height).ok().and_then(|h| w.checked_mul(h)))
        .ok_or_else(|| Error::invalid("pgm: image dimensions overflow"))?;

    let pixels = if ascii {
        // every pixel needs at least two bytes ("0 "), so reject early before allocating
        if count > data.len() {
            return Err(Error::invalid("pgm: truncated pixel data"));
        }
        let mut pixels = Vec::with_capacity(count);
        for i in 0..count {
            let v = cur
                .number("pixel")
                .map_err(|_| Error::invalid(format!("pgm: truncated or bad pixel data at pixel {i}")))?;
            if v > maxval {
                return Err(Error::invalid(format!("pgm: pixel {i} value {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as u8);
        }
        pixels
    } else {
        // exactly one whitespace byte separates the header from the raster
        match data.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::invalid("pgm: missing separator before raster")),
        }
        let raster = data
            .get(cur.pos..)
            .filter(|r| r.len() >= count)
            .ok_or_else(|| Error::invalid("pgm: truncated pixel data"))?;
        let pixels = raster[..count].to_vec();
        if let Some(i) = pixels.iter().position(|&v| u64::from(v) > maxval) {
            return Err(Error::invalid(format!("pgm: pixel {i} exceeds maxval {maxval}")));
        }
        pixels
    };
    Ok(GrayImage {
        height: height as usize,
        width: width as usize,
        maxval: maxval as u8,
        pixels,
    })
}

pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&data).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Binary P5 encoding of `img`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}
