//! Image file I/O: binary PGM (P5) read/write and 8-bit PNG read.
//!
//! PGM is the canonical interchange format: the writer emits a fixed
//! `P5\n<w> <h>\n255\n` header so that saving and re-loading an image is
//! bit-exact. PNG is accepted read-only for convenience.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, LoadedImage, RgbImage};

/// Decode a P5 PGM or an 8-bit PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, path).map(LoadedImage::Gray)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes, path)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "expected a P5 PGM or PNG signature".into(),
        })
    }
}

/// Load and collapse to grayscale in one step.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(load_image(path)?.into_gray())
}

/// Write a binary PGM with maxval 255. The header layout is fixed, so the
/// output for a given image is always byte-identical.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + img.data().len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend_from_slice(img.data());
    fs::write(path, out)?;
    Ok(())
}

/// Encode an image to the canonical PGM byte form without touching disk.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + img.data().len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend_from_slice(img.data());
    out
}

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Parse a P5 header token, skipping whitespace and `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<u64> {
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
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

pub(crate) fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(malformed(path, "missing P5 magic"));
    }
    let mut pos = 2;
    let width = next_token(bytes, &mut pos)
        .ok_or_else(|| malformed(path, "missing or non-numeric width"))?;
    let height = next_token(bytes, &mut pos)
        .ok_or_else(|| malformed(path, "missing or non-numeric height"))?;
    let maxval = next_token(bytes, &mut pos)
        .ok_or_else(|| malformed(path, "missing or non-numeric maxval"))?;
    if width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
        return Err(malformed(path, format!("bad dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("maxval {maxval}; only 8-bit (maxval <= 255) is supported"),
        });
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed(path, "missing separator after maxval"));
    }
    pos += 1;
    let expected = width as usize * height as usize;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    GrayImage::new(width as u32, height as u32, payload[..expected].to_vec())
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<LoadedImage> {
    let decoded =
        image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| {
            Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: e.to_string(),
            }
        })?;
    match decoded {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            Ok(LoadedImage::Gray(GrayImage::new(w, h, img.into_raw())?))
        }
        image::DynamicImage::ImageRgb8(img) => {
            let (w, h) = img.dimensions();
            Ok(LoadedImage::Rgb(RgbImage::new(w, h, img.into_raw())?))
        }
        image::DynamicImage::ImageLumaA8(_) | image::DynamicImage::ImageRgba8(_) => {
            // Alpha is not meaningful here; drop it.
            let rgb = decoded.to_rgb8();
            let (w, h) = rgb.dimensions();
            Ok(LoadedImage::Rgb(RgbImage::new(w, h, rgb.into_raw())?))
        }
        other => Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!(
                "{:?} pixels; only 8-bit channels are supported",
                other.color()
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let dir = tmp();
        let path = dir.path().join("a.pgm");
        let img = GrayImage::from_fn(13, 7, |x, y| (x * 19 + y * 7) as u8);
        save_gray(&img, &path).unwrap();
        let reread = load_gray(&path).unwrap();
        assert_eq!(reread, img);
        // Canonical files survive a save(load(x)) cycle byte-identically.
        let first = fs::read(&path).unwrap();
        let path2 = dir.path().join("b.pgm");
        save_gray(&reread, &path2).unwrap();
        assert_eq!(fs::read(&path2).unwrap(), first);
    }

    #[test]
    fn pgm_header_with_comments_parses() {
        let bytes = b"P5\n# a comment\n3 2\n# another\n255\n\x01\x02\x03\x04\x05\x06";
        let img = decode_pgm(bytes, Path::new("c.pgm")).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.data(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn truncated_header_is_malformed() {
        let dir = tmp();
        let path = dir.path().join("t.pgm");
        fs::write(&path, b"P5\n12 ").unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().contains("malformed header"), "got: {err}");
    }

    #[test]
    fn truncated_payload_is_distinct_error() {
        let dir = tmp();
        let path = dir.path().join("t.pgm");
        fs::write(&path, b"P5\n4 4\n255\nxy").unwrap();
        assert!(matches!(
            load_image(&path).unwrap_err(),
            Error::TruncatedPayload {
                expected: 16,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn sixteen_bit_pgm_rejected() {
        let dir = tmp();
        let path = dir.path().join("deep.pgm");
        fs::write(&path, b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(
            load_image(&path).unwrap_err(),
            Error::UnsupportedBitDepth { .. }
        ));
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = load_image("/nonexistent/nope.pgm").unwrap_err();
        assert!(matches!(err, Error::UnreadableFile { .. }));
    }

    #[test]
    fn full_resolution_png_loads_with_correct_dimensions() {
        // Matches the camera resolution the pipeline is expected to accept.
        let dir = tmp();
        let path = dir.path().join("big.png");
        let buf = image::GrayImage::from_pixel(3840, 2880, image::Luma([128u8]));
        buf.save(&path).unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded.dimensions(), (3840, 2880));
    }

    #[test]
    fn rgb_png_loads_as_rgb() {
        let dir = tmp();
        let path = dir.path().join("rgb.png");
        let buf = image::RgbImage::from_fn(5, 4, |x, y| image::Rgb([x as u8, y as u8, 200]));
        buf.save(&path).unwrap();
        match load_image(&path).unwrap() {
            LoadedImage::Rgb(img) => {
                assert_eq!((img.width(), img.height()), (5, 4));
                assert_eq!(img.get(3, 2), (3, 2, 200));
            }
            LoadedImage::Gray(_) => panic!("expected RGB"),
        }
    }

    proptest! {
        #[test]
        fn pgm_save_load_identity(
            w in 1u32..32,
            h in 1u32..32,
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = crate::seeding::rng_from_seed(seed);
            let img = GrayImage::from_fn(w, h, |_, _| rng.gen());
            let bytes = encode_pgm(&img);
            let back = decode_pgm(&bytes, Path::new("prop.pgm")).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
