//! 8-bit grayscale image files: PNG for reading and writing, binary PGM
//! (`P5`) for reading and writing. Byte `b` maps to intensity `b / 255`.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::GrayImage;
use crate::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Upper bound on decoded pixels; larger images are rejected before
/// allocation.
pub const MAX_PIXELS: usize = 1 << 26;

/// Decode an 8-bit (or lower, expanded) single-channel PNG.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let mut decoder =
        png::Decoder::new_with_limits(Cursor::new(bytes), png::Limits { bytes: MAX_PIXELS });
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(format!("png: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Eight {
        return Err(Error::Decode(format!(
            "png: expected 8-bit grayscale, found {color:?} {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(format!("png: {e}")))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let mut px = Vec::with_capacity(w * h);
    for row in buf.chunks(stride).take(h) {
        px.extend_from_slice(&row[..w]);
    }
    GrayImage::from_u8(w, h, &px)
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Decode(format!("png encode: {e}")))?;
        writer
            .write_image_data(&img.to_u8())
            .map_err(|e| Error::Decode(format!("png encode: {e}")))?;
    }
    Ok(out)
}

/// Decode a binary PGM (`P5`) with `maxval <= 255`.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Decode("pgm: missing P5 magic".into()));
    }
    pos += 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        skip_ws_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos || pos - start > 9 {
            return Err(Error::Decode(format!("pgm: bad {name}")));
        }
        // at most nine ASCII digits, cannot overflow
        fields[i] = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .expect("digits");
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Decode(format!("pgm: unsupported maxval {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(Error::Decode("pgm: empty image".into()));
    }
    let n = w
        .checked_mul(h)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::Decode("pgm: image too large".into()))?;
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Decode("pgm: missing header terminator".into()));
    }
    pos += 1;
    let raster = &bytes[pos..];
    if raster.len() < n {
        return Err(Error::Decode(format!(
            "pgm: raster truncated ({} of {n} bytes)",
            raster.len()
        )));
    }
    let scale = maxval as f64;
    let data = raster[..n]
        .iter()
        .map(|&b| (f64::from(b) / scale).min(1.0))
        .collect();
    GrayImage::from_vec(w, h, data)
}

fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            return;
        }
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

/// Decode PNG or PGM, chosen by the leading magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::Decode(
            "unrecognized image format (expected PNG or binary PGM)".into(),
        ))
    }
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Write PNG, or PGM when the extension is `.pgm`.
pub fn write_image(path: &Path, img: &GrayImage) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => encode_pgm(img),
        _ => encode_png(img)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
