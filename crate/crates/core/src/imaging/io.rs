//! PGM (P2/P5) and PNG decoding into [`GrayImage`], and P5 output for
//! debugging intermediate rasters.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

/// Loads an 8-bit grayscale image. Format is chosen from the file magic,
/// not the extension.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        read_pgm(&bytes).map_err(|reason| Error::decode(path, reason))
    } else if bytes.starts_with(b"\x89PNG") {
        read_png(&bytes).map_err(|reason| Error::decode(path, reason))
    } else {
        Err(Error::decode(path, "unrecognized format (expected PGM P2/P5 or PNG)"))
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        let tok = self
            .token()
            .ok_or_else(|| format!("malformed header: missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                format!(
                    "malformed header: {what} '{}' is not a number",
                    String::from_utf8_lossy(tok)
                )
            })
    }
}

/// Decodes an ASCII (P2) or binary (P5) PGM. Maxval must be at most 255;
/// values are rescaled to `[0, 255]` when maxval is smaller.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token().ok_or("empty file")?;
    let ascii = match magic {
        b"P2" => true,
        b"P5" => false,
        other => return Err(format!("unsupported PGM magic '{}'", String::from_utf8_lossy(other))),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("malformed header: zero dimension {width}x{height}"));
    }
    if maxval == 0 {
        return Err("malformed header: maxval 0".into());
    }
    if maxval > 255 {
        return Err(format!("unsupported bit depth: maxval {maxval} exceeds 255"));
    }
    let count = width
        .checked_mul(height)
        .ok_or("malformed header: dimensions overflow")?;

    let mut data = Vec::with_capacity(count);
    if ascii {
        for i in 0..count {
            let v = cur
                .number("pixel")
                .map_err(|_| format!("truncated pixel data: got {i} of {count} values"))?;
            if v > maxval {
                return Err(format!("pixel value {v} exceeds maxval {maxval}"));
            }
            data.push(v as u8);
        }
    } else {
        // Exactly one whitespace byte separates maxval from the raster.
        let start = cur.pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| format!("truncated pixel data: expected {count} bytes"))?;
        if let Some(&v) = raster.iter().find(|&&v| v as usize > maxval) {
            return Err(format!("pixel value {v} exceeds maxval {maxval}"));
        }
        data.extend_from_slice(raster);
    }
    if maxval != 255 {
        let m = maxval as u32;
        for v in &mut data {
            *v = ((*v as u32 * 255 * 2 + m) / (2 * m)) as u8;
        }
    }
    GrayImage::from_vec(width, height, data).map_err(|e| e.to_string())
}

/// Decodes an 8-bit grayscale or RGB PNG. Palette and sub-byte grayscale
/// images are expanded to 8 bits first; RGB is reduced to luma with
/// `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn read_png(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(format!("unsupported bit depth: {depth:?}"));
    }
    let size = reader.output_buffer_size().ok_or("image too large to decode")?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;

    let mut data = Vec::with_capacity(w * h);
    for row in buf.chunks(stride).take(h) {
        match color {
            png::ColorType::Grayscale => data.extend_from_slice(&row[..w]),
            png::ColorType::Rgb => data.extend(row[..3 * w].chunks_exact(3).map(luma)),
            other => return Err(format!("unsupported color type {other:?}")),
        }
    }
    GrayImage::from_vec(w, h, data).map_err(|e| e.to_string())
}

#[inline]
fn luma(rgb: &[u8]) -> u8 {
    let (r, g, b) = (rgb[0] as u32, rgb[1] as u32, rgb[2] as u32);
    ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8
}

/// Writes a binary (P5) PGM with maxval 255.
pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(img.data().len() + 20);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height()).expect("write to Vec");
    out.extend_from_slice(img.data());
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode_png(w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, w, h);
            enc.set_color(color);
            enc.set_depth(depth);
            let mut writer = enc.write_header().unwrap();
            writer.write_image_data(data).unwrap();
        }
        out
    }

    #[test]
    fn ascii_pgm_with_comment() {
        let img = read_pgm(b"P2\n# hello\n2 2\n255\n0 10\n20 30\n").unwrap();
        assert_eq!(img, GrayImage::from_vec(2, 2, vec![0, 10, 20, 30]).unwrap());
    }

    #[test]
    fn binary_pgm_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y) as u8);
        write_pgm(&path, &img).unwrap();
        assert_eq!(load_gray(&path).unwrap(), img);
    }

    #[test]
    fn pgm_rescales_small_maxval() {
        let img = read_pgm(b"P2 3 1 15 0 7 15").unwrap();
        assert_eq!(img.data(), &[0, 119, 255]);
    }

    #[test]
    fn pgm_errors() {
        assert!(read_pgm(b"P2 2 2 65535 0 0 0 0").unwrap_err().contains("bit depth"));
        assert!(read_pgm(b"P5 2 2 255\n\x00\x01").unwrap_err().contains("truncated"));
        assert!(read_pgm(b"P2 2 x 255").unwrap_err().contains("malformed"));
        assert!(read_pgm(b"P2 2 1 255 0 300").is_err());
    }

    #[test]
    fn png_gray_and_rgb() {
        let bytes = encode_png(2, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[3, 250]);
        assert_eq!(read_png(&bytes).unwrap().data(), &[3, 250]);

        let rgb = [255, 255, 255, 100, 150, 200, 0, 0, 0];
        let bytes = encode_png(3, 1, png::ColorType::Rgb, png::BitDepth::Eight, &rgb);
        assert_eq!(read_png(&bytes).unwrap().data(), &[255, 141, 0]);
    }

    #[test]
    fn png_sixteen_bit_is_rejected() {
        let bytes = encode_png(1, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[1, 2]);
        assert!(read_png(&bytes).unwrap_err().contains("bit depth"));
    }

    #[test]
    fn load_reports_path() {
        let err = load_gray("/nonexistent/face.pgm").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/face.pgm"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.pgm");
        fs::write(&path, b"hello").unwrap();
        let err = load_gray(&path).unwrap_err();
        assert!(err.to_string().contains("junk.pgm"));
    }
}
