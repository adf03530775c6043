//! Image and depth-map file formats.
//!
//! Color images are 8-bit PNG/PPM mapped linearly to `[0, 1]`. Depth maps are
//! PFM (single channel, sign of the scale line selects endianness) or the raw
//! `DPTH` layout: magic, `u32` width, `u32` height, then little-endian `f32`
//! values row-major from the top row.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved RGB image with `f64` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        ColorImage {
            width,
            height,
            data: vec![0.0; 3 * width * height],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut img = ColorImage::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Box-filter downscale by an integer factor (trailing partial blocks dropped).
    pub fn downscale(&self, divisor: usize) -> ColorImage {
        if divisor <= 1 {
            return self.clone();
        }
        let (w, h) = (self.width / divisor, self.height / divisor);
        let mut out = ColorImage::new(w, h);
        let norm = 1.0 / (divisor * divisor) as f64;
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for dy in 0..divisor {
                    for dx in 0..divisor {
                        let p = self.pixel(x * divisor + dx, y * divisor + dy);
                        for ch in 0..3 {
                            acc[ch] += p[ch];
                        }
                    }
                }
                for ch in 0..3 {
                    out.data[3 * (y * w + x) + ch] = acc[ch] * norm;
                }
            }
        }
        out
    }
}

pub fn load_image(path: &Path) -> Result<ColorImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(ColorImage {
        width: w as usize,
        height: h as usize,
        data: rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
    })
}

/// Quantizes to 8 bits after clamping to `[0, 1]`. Format follows the extension.
pub fn save_image(img: &ColorImage, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("buffer size matches dimensions");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Single-channel `f32` grid, row-major from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

pub fn write_pfm(map: &ScalarMap, path: &Path, little_endian: bool) -> Result<()> {
    let mut out = format!("Pf\n{} {}\n{}\n", map.width, map.height, if little_endian { "-1.0" } else { "1.0" })
        .into_bytes();
    // PFM stores rows bottom to top
    for y in (0..map.height).rev() {
        for &v in &map.data[y * map.width..(y + 1) * map.width] {
            out.extend_from_slice(&if little_endian { v.to_le_bytes() } else { v.to_be_bytes() });
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_dpth(map: &ScalarMap, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::with_capacity(12 + 4 * map.data.len());
    out.extend_from_slice(b"DPTH");
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for v in &map.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads a PFM or DPTH file, detected from its magic bytes.
pub fn read_scalar_map(path: &Path) -> Result<ScalarMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    if bytes.starts_with(b"DPTH") {
        parse_dpth(&bytes, &name)
    } else if bytes.starts_with(b"Pf") || bytes.starts_with(b"PF") {
        parse_pfm(&bytes, &name)
    } else {
        Err(Error::Malformed {
            file: name,
            detail: "unrecognized depth header (expected PFM or DPTH)".into(),
        })
    }
}

fn parse_dpth(bytes: &[u8], name: &str) -> Result<ScalarMap> {
    if bytes.len() < 12 {
        return Err(Error::Malformed {
            file: name.into(),
            detail: "DPTH header shorter than 12 bytes".into(),
        });
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Malformed {
            file: name.into(),
            detail: "DPTH dimensions overflow".into(),
        })?;
    let body = &bytes[12..];
    if body.len() < need {
        return Err(Error::Truncated {
            file: name.into(),
            detail: format!("expected {need} bytes of depth data, found {}", body.len()),
        });
    }
    let data = body[..need]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScalarMap { width, height, data })
}

fn parse_pfm(bytes: &[u8], name: &str) -> Result<ScalarMap> {
    let malformed = |detail: &str| Error::Malformed {
        file: name.into(),
        detail: detail.into(),
    };
    // header: three whitespace-separated tokens, then a single whitespace byte
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("unexpected end of PFM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed("non-ascii PFM header"))?);
    }
    pos += 1;
    if tokens[0] != "Pf" {
        return Err(malformed("only single-channel PFM (`Pf`) depth maps are supported"));
    }
    let width: usize = tokens[1].parse().map_err(|_| malformed("bad PFM width"))?;
    let height: usize = tokens[2].parse().map_err(|_| malformed("bad PFM height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| malformed("bad PFM scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed("PFM scale must be nonzero"));
    }
    let little = scale < 0.0;
    let need = width * height * 4;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() < need {
        return Err(Error::Truncated {
            file: name.into(),
            detail: format!("expected {need} bytes of PFM data, found {}", body.len()),
        });
    }
    let mut data = vec![0f32; width * height];
    for (i, c) in body[..need].chunks_exact(4).enumerate() {
        let v = if little {
            f32::from_le_bytes(c.try_into().unwrap())
        } else {
            f32::from_be_bytes(c.try_into().unwrap())
        };
        let (row_from_bottom, x) = (i / width, i % width);
        data[(height - 1 - row_from_bottom) * width + x] = v;
    }
    Ok(ScalarMap { width, height, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_both_endiannesses_round_trip() {
        let map = ScalarMap {
            width: 3,
            height: 2,
            data: vec![1.0, 2.5, -3.0, f32::NAN, 0.0, 7.25],
        };
        let dir = tempfile::tempdir().unwrap();
        for le in [true, false] {
            let p = dir.path().join(format!("d{le}.pfm"));
            write_pfm(&map, &p, le).unwrap();
            let back = read_scalar_map(&p).unwrap();
            assert_eq!((back.width, back.height), (3, 2));
            for (a, b) in map.data.iter().zip(&back.data) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn dpth_round_trip_and_truncation() {
        let map = ScalarMap {
            width: 2,
            height: 2,
            data: vec![0.5, 1.5, 2.5, 3.5],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.dpth");
        write_dpth(&map, &p).unwrap();
        assert_eq!(read_scalar_map(&p).unwrap(), map);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_scalar_map(&p), Err(Error::Truncated { .. })));
        std::fs::write(&p, b"JUNKJUNKJUNK").unwrap();
        assert!(matches!(read_scalar_map(&p), Err(Error::Malformed { .. })));
    }

    #[test]
    fn box_downscale_averages_blocks() {
        let mut img = ColorImage::new(4, 2);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i / 3) as f64;
        }
        let half = img.downscale(2);
        assert_eq!((half.width, half.height), (2, 1));
        // block of pixels 0,1,4,5 → mean 2.5
        assert_eq!(half.pixel(0, 0), [2.5; 3]);
        assert_eq!(half.pixel(1, 0), [4.5; 3]);
    }

    #[test]
    fn png_round_trip_is_exact_on_8bit_values() {
        let mut img = ColorImage::new(3, 2);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i * 13 % 256) as f64 / 255.0;
        }
        let dir = tempfile::tempdir().unwrap();
        for ext in ["png", "ppm"] {
            let p = dir.path().join(format!("a.{ext}"));
            save_image(&img, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), img);
        }
    }
}
