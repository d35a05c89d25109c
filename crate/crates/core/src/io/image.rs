//! 8-bit grayscale image files: PGM (P2/P5) and PNG.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Image;
use crate::scalar::Scalar;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads a PGM or PNG file, picking the decoder from the file signature.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

/// Decodes PGM or PNG bytes.
pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::Unsupported("not a PGM (P2/P5) or PNG file".into()))
    }
}

/// Header tokenizer that skips whitespace and `#` comments.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .next()
            .ok_or_else(|| Error::Format(format!("PGM truncated before {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM {what} is not a number")))
    }
}

/// Decodes a plain (P2) or raw (P5) 8-bit PGM. Intensities are
/// `value / maxval`.
pub fn decode_pgm<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let mut tokens = Tokens { bytes, pos: 0 };
    let magic = tokens.next().unwrap_or_default();
    let raw = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::Unsupported("PGM magic must be P2 or P5".into())),
    };
    let width = tokens.number("width")?;
    let height = tokens.number("height")?;
    let maxval = tokens.number("maxval")?;
    if maxval == 0 {
        return Err(Error::Format("PGM maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::Unsupported(format!(
            "PGM depth maxval={maxval}; only 8-bit images are supported"
        )));
    }
    let n = width
        .checked_mul(height)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("bad PGM size {width}x{height}")))?;

    let values: Vec<usize> = if raw {
        // exactly one whitespace byte separates the header from the raster
        let start = tokens.pos + 1;
        let raster = bytes.get(start..start + n).ok_or_else(|| {
            Error::Format(format!(
                "PGM raster truncated: expected {n} bytes, found {}",
                bytes.len().saturating_sub(start)
            ))
        })?;
        raster.iter().map(|&b| usize::from(b)).collect()
    } else {
        (0..n)
            .map(|i| tokens.number(&format!("sample {i}")))
            .collect::<Result<_>>()?
    };
    if let Some(v) = values.iter().find(|&&v| v > maxval) {
        return Err(Error::Format(format!(
            "PGM sample {v} exceeds maxval {maxval}"
        )));
    }
    let scale = T::from_count(maxval);
    Image::new(
        width,
        height,
        values
            .into_iter()
            .map(|v| T::from_count(v) / scale)
            .collect(),
    )
}

/// Decodes an 8-bit grayscale PNG.
pub fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let png_err = |e: png::DecodingError| Error::Format(format!("PNG: {e}"));
    let mut reader = png::Decoder::new(Cursor::new(bytes))
        .read_info()
        .map_err(png_err)?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Eight {
        return Err(Error::Unsupported(format!(
            "PNG must be 8-bit grayscale, got {color:?} {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let scale = T::lit(255.0);
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        pixels.extend(
            row[..w]
                .iter()
                .map(|&b| T::from_count(usize::from(b)) / scale),
        );
    }
    Image::new(w, h, pixels)
}

/// Quantizes intensities to 8 bits.
fn quantize<T: Scalar>(img: &Image<T>) -> Vec<u8> {
    img.pixels()
        .values()
        .iter()
        .map(|&v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Writes a raw (P5) PGM with maxval 255.
pub fn write_pgm<T: Scalar, W: Write>(img: &Image<T>, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(&quantize(img))?;
    Ok(())
}

pub fn save_pgm<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(img, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png<T: Scalar, W: Write>(img: &Image<T>, out: W) -> Result<()> {
    let png_err = |e: png::EncodingError| Error::Format(format!("PNG: {e}"));
    let mut enc = png::Encoder::new(out, img.width() as u32, img.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&quantize(img)).map_err(png_err)?;
    writer.finish().map_err(png_err)
}
