//! Binary PGM (P5) and PPM (P6) with maxval 255.
//!
//! Samples map to `[0, 1]` as `v / 255`; writing rounds `v * 255` to the
//! nearest integer, so a save/load round trip is within `1/255` per sample.

use std::path::Path;

use super::image::Image;
use crate::error::{AcavError, Result};

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let mut p = HeaderParser { bytes, pos: 0 };
    let channels = match p.token()? {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(AcavError::Format(format!(
                "unsupported magic {:?}; expected P5 or P6",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = p.number("width")?;
    let height = p.number("height")?;
    let maxval = p.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(AcavError::Format(format!(
            "degenerate image size {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(AcavError::Format(format!(
            "unsupported maxval {maxval}; only 255 is accepted"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(p.pos) {
        Some(b) if b.is_ascii_whitespace() => p.pos += 1,
        _ => return Err(AcavError::Format("missing whitespace after maxval".into())),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| AcavError::Format("image size overflows".into()))?;
    let payload = &bytes[p.pos..];
    if payload.len() < needed {
        return Err(AcavError::Format(format!(
            "truncated payload: header declares {needed} bytes, file has {}",
            payload.len()
        )));
    }
    let pixels = payload[..needed]
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();
    Image::new(height, width, channels, pixels)
}

/// Encodes `image`, optionally embedding `comment` lines in the header.
pub fn encode(image: &Image, comments: &[&str]) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n");
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&format!("{} {}\n255\n", image.width(), image.height()));
    let mut bytes = out.into_bytes();
    bytes.extend(image.pixels().iter().map(|&v| quantize(v)));
    bytes
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| AcavError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        AcavError::Format(msg) => AcavError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_image(image: &Image, path: &Path) -> Result<()> {
    save_image_with_comments(image, path, &[])
}

pub fn save_image_with_comments(image: &Image, path: &Path, comments: &[&str]) -> Result<()> {
    std::fs::write(path, encode(image, comments)).map_err(|e| AcavError::io(path, e))
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(AcavError::Format("malformed header: unexpected end".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                AcavError::Format(format!(
                    "malformed header: {what} is {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_white_pixel() {
        let img = decode(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (1, 1, 1));
        assert_eq!(img.pixels(), &[1.0]);
    }

    #[test]
    fn comments_are_skipped() {
        let img = decode(b"P5\n# made by hand\n2 1 # trailing\n255\n\x00\x80").unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.pixels()[1], 128.0 / 255.0);
    }

    #[test]
    fn truncated_ppm_is_rejected() {
        let err = decode(b"P6\n4 4\n255\n\x00\x00\x00").unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn unsupported_inputs() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode(b"P5\n1 x\n255\n\x00").is_err());
        assert!(decode(b"P5\n1 1").is_err());
        assert!(decode(b"P5\n0 1\n255\n").is_err());
    }

    #[test]
    fn encode_embeds_comments() {
        let img = Image::filled(2, 2, 3, 0.5).unwrap();
        let bytes = encode(&img, &["config_hash abc"]);
        assert!(bytes.starts_with(b"P6\n# config_hash abc\n2 2\n255\n"));
        let back = decode(&bytes).unwrap();
        assert_eq!(back.pixels(), &[128.0 / 255.0; 12]);
    }
}
