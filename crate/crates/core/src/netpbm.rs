//! Binary PGM (P5) label maps and PPM (P6) images.
//!
//! Label maps are written as `P5\n<w> <h>\n255\n` followed by one byte per
//! pixel, row-major. Overlays use a fixed palette: category `k` gets entry
//! `k + 1` of the Pascal VOC bit-interleaved colormap (roof-red `(128,0,0)`,
//! green `(0,128,0)`, olive `(128,128,0)`, navy `(0,0,128)`, ...) and
//! unlabeled pixels are black.

use std::path::Path;

use crate::error::{Error, Result};
use crate::segment::{RasterImage, SegmentationMap, UNLABELED};

/// Overlay color for a label.
pub fn palette_color(label: u8) -> [u8; 3] {
    if label == UNLABELED {
        return [0, 0, 0];
    }
    let mut c = u32::from(label) + 1;
    let mut rgb = [0u8; 3];
    for shift in (0..8).rev() {
        for (ch, out) in rgb.iter_mut().enumerate() {
            *out |= (((c >> ch) & 1) as u8) << shift;
        }
        c >>= 3;
    }
    rgb
}

fn header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

pub fn encode_pgm(map: &SegmentationMap) -> Vec<u8> {
    let mut out = header("P5", map.width(), map.height());
    out.extend_from_slice(map.labels());
    out
}

pub fn encode_ppm(image: &RasterImage) -> Vec<u8> {
    let mut out = header("P6", image.width(), image.height());
    out.extend_from_slice(image.pixels());
    out
}

/// Palette rendering of a label map.
pub fn colorize(map: &SegmentationMap) -> RasterImage {
    let pixels = map.labels().iter().flat_map(|&l| palette_color(l)).collect();
    RasterImage::new(map.width(), map.height(), pixels).expect("map dimensions are valid")
}

/// Alpha-blends palette colors over `image`; unlabeled pixels keep the source color.
pub fn blend(image: &RasterImage, map: &SegmentationMap, alpha: f64) -> Result<RasterImage> {
    if (image.width(), image.height()) != (map.width(), map.height()) {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs map {}x{}",
            image.width(),
            image.height(),
            map.width(),
            map.height()
        )));
    }
    let a = alpha.clamp(0.0, 1.0);
    let pixels = image
        .pixels()
        .chunks_exact(3)
        .zip(map.labels())
        .flat_map(|(px, &l)| {
            if l == UNLABELED {
                return [px[0], px[1], px[2]];
            }
            let c = palette_color(l);
            let mix = |s: u8, o: u8| ((1.0 - a) * f64::from(s) + a * f64::from(o)).round() as u8;
            [mix(px[0], c[0]), mix(px[1], c[1]), mix(px[2], c[2])]
        })
        .collect();
    RasterImage::new(image.width(), image.height(), pixels)
}

struct Header {
    width: usize,
    height: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Netpbm(format!(
            "expected magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and `#` comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Netpbm(format!("bad header field at byte {start}")))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Netpbm("missing whitespace after maxval".into()));
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Netpbm(format!("unsupported maxval {maxval}")));
    }
    Ok(Header {
        width,
        height,
        offset: pos + 1,
    })
}

fn payload<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    let n = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(Error::InvalidDimensions {
            width: h.width,
            height: h.height,
        })?;
    let data = &bytes[h.offset..];
    if data.len() != n {
        return Err(Error::Netpbm(format!("expected {n} data bytes, found {}", data.len())));
    }
    Ok(data)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<SegmentationMap> {
    let h = parse_header(bytes, b"P5")?;
    let data = payload(bytes, &h, 1)?;
    SegmentationMap::new(h.width, h.height, data.to_vec())
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RasterImage> {
    let h = parse_header(bytes, b"P6")?;
    let data = payload(bytes, &h, 3)?;
    RasterImage::new(h.width, h.height, data.to_vec())
}

pub fn save_pgm(map: &SegmentationMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(map)).map_err(|e| Error::io(path, e))
}

pub fn save_ppm(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<SegmentationMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| Error::Netpbm(format!("{}: {e}", path.display())))
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes).map_err(|e| Error::Netpbm(format!("{}: {e}", path.display())))
}
