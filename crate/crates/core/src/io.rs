//! 8-bit PGM (P5) and PNG reading; PGM writing.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayImage, Plane};

/// Loads an 8-bit grayscale or color image as normalized intensities.
///
/// Pixel value `k` maps to `k / maxval` (`k / 255` for ordinary files). Color
/// PNGs are reduced with luma weights `0.299 R + 0.587 G + 0.114 B` before
/// normalization; alpha is ignored.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes)
    } else {
        Err(Error::Format("not a binary PGM (P5) or PNG file".into()))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
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
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PGM header number".into()))?;
    }
    let [width, height, maxval] = fields;
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after PGM maxval".into()));
    }
    pos += 1;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval} (8-bit only)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("zero-sized PGM".into()));
    }
    let n = width * height;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Format(format!("PGM pixel data truncated, expected {n} bytes")))?;
    let scale = maxval as f64;
    let data = raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let fmt = |e: png::DecodingError| Error::Format(format!("PNG: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(fmt)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(fmt)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "unsupported PNG bit depth {:?} (8-bit only)",
            info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::Format(format!("unsupported PNG color type {other:?}"))),
    };
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &buf[y * info.line_size..y * info.line_size + width * channels];
        for px in row.chunks_exact(channels) {
            let v = if channels >= 3 {
                (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0
            } else {
                px[0] as f64 / 255.0
            };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(width, height, data)
}

/// Encodes as binary PGM, quantizing with `round(v * 255)`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n# comment line\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn zero_pgm_loads_as_zeros() {
        let img = decode_gray(&pgm(2, 2, &[0, 0, 0, 0])).unwrap();
        assert_eq!(img.data(), &[0.0; 4]);
    }

    #[test]
    fn normalization_endpoints() {
        let img = decode_gray(&pgm(3, 1, &[255, 128, 0])).unwrap();
        assert_eq!(img.at(0, 0), 1.0);
        assert_eq!(img.at(1, 0), 128.0 / 255.0);
        assert!((img.at(1, 0) - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_gray("/definitely/not/here.pgm").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/definitely/not/here.pgm"));
    }

    #[test]
    fn unknown_encoding_is_format_error() {
        assert!(matches!(decode_gray(b"P2\n1 1\n255\n0"), Err(Error::Format(_))));
        assert!(matches!(decode_gray(&pgm(4, 4, &[0; 3])), Err(Error::Format(_))));
    }

    #[test]
    fn png_color_uses_luma_weights() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 2, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[255, 0, 0, 10, 200, 30]).unwrap();
        }
        let img = decode_gray(&bytes).unwrap();
        assert!((img.at(0, 0) - 0.299).abs() < 1e-12);
        let expect = (0.299 * 10.0 + 0.587 * 200.0 + 0.114 * 30.0) / 255.0;
        assert!((img.at(1, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn png_sixteen_bit_rejected() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 1, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[1, 2]).unwrap();
        }
        assert!(matches!(decode_gray(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_round_trip_on_quantized_values() {
        let img = GrayImage::from_fn(5, 3, |x, y| ((x * 37 + y * 11) % 256) as f64 / 255.0);
        assert_eq!(decode_gray(&encode_pgm(&img)).unwrap(), img);
    }
}
