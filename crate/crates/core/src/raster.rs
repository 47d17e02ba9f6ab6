//! Raster types, grayscale conversion and histogram construction.
//!
//! Images are immutable after construction; every stage that transforms an
//! image allocates a new buffer, so values can be shared freely across
//! worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod io;

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    /// Build an image from raw row-major bytes. The buffer length must equal
    /// `width * height` and both dimensions must be at least 1.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "pixel buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Build an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width >= 1 && height >= 1);
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    /// Constant-valued image.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major pixel bytes.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// One image row as a byte slice.
    #[inline]
    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.data[start..start + w]
    }

    /// Copy of the rectangle with top-left `(x, y)` and the given size.
    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> Result<GrayImage> {
        if x.checked_add(width).is_none_or(|r| r > self.width)
            || y.checked_add(height).is_none_or(|b| b > self.height)
        {
            return Err(Error::invalid(format!(
                "crop {}x{} at ({}, {}) exceeds {}x{} image",
                width, height, x, y, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for row in y..y + height {
            let src = self.row(row);
            data.extend_from_slice(&src[x as usize..(x + width) as usize]);
        }
        GrayImage::new(width, height, data)
    }
}

/// 8-bit three-channel raster, row-major `(r, g, b)` triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    /// Build an image from raw interleaved RGB bytes (`3 * width * height`).
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        let expected = 3 * width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "rgb buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> (u8, u8, u8) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        (self.data[i], self.data[i + 1], self.data[i + 2])
    }
}

/// Either flavor of decoded image.
#[derive(Debug, Clone)]
pub enum LoadedImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl LoadedImage {
    /// Collapse to grayscale, converting RGB input with [`to_grayscale`].
    pub fn into_gray(self) -> GrayImage {
        match self {
            LoadedImage::Gray(g) => g,
            LoadedImage::Rgb(rgb) => to_grayscale(&rgb),
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        match self {
            LoadedImage::Gray(g) => (g.width(), g.height()),
            LoadedImage::Rgb(r) => (r.width(), r.height()),
        }
    }
}

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn from_counts(bins: Vec<u64>) -> Result<Self> {
        if bins.len() != 256 {
            return Err(Error::invalid("histogram must have exactly 256 bins"));
        }
        let total = bins.iter().sum();
        Ok(Histogram { bins, total })
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn count(&self, intensity: u8) -> u64 {
        self.bins[intensity as usize]
    }

    /// Total mass; equals the pixel count of the source image.
    pub fn total(&self) -> u64 {
        self.total
    }
}

/// ITU-R BT.601 luma with round-half-up: `round(0.299 r + 0.587 g + 0.114 b)`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.width() as usize * img.height() as usize);
    for px in img.data().chunks_exact(3) {
        let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
        data.push((luma + 0.5).floor().clamp(0.0, 255.0) as u8);
    }
    GrayImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}

/// Count pixels per intensity value.
pub fn histogram(img: &GrayImage) -> Histogram {
    let mut bins = vec![0u64; 256];
    for &p in img.data() {
        bins[p as usize] += 1;
    }
    let total = img.width() as u64 * img.height() as u64;
    Histogram { bins, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grayscale_identity_on_white() {
        let img = RgbImage::new(1, 1, vec![255, 255, 255]).unwrap();
        assert_eq!(to_grayscale(&img).get(0, 0), 255);
    }

    #[test]
    fn grayscale_passthrough_on_gray_triples() {
        for g in 0..=255u8 {
            let img = RgbImage::new(1, 1, vec![g, g, g]).unwrap();
            assert_eq!(to_grayscale(&img).get(0, 0), g, "gray level {g}");
        }
    }

    #[test]
    fn grayscale_pure_red() {
        let img = RgbImage::new(1, 1, vec![255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&img).get(0, 0), 76);
    }

    #[test]
    fn histogram_constant_image() {
        let img = GrayImage::filled(10, 10, 7);
        let h = histogram(&img);
        assert_eq!(h.count(7), 100);
        assert_eq!(h.total(), 100);
        assert_eq!(h.bins().iter().sum::<u64>(), 100);
    }

    #[test]
    fn histogram_two_valued_image() {
        // Half the pixels at 50, half at 200, constructed directly.
        let img = GrayImage::from_fn(16, 16, |x, _| if x < 8 { 50 } else { 200 });
        let h = histogram(&img);
        assert_eq!(h.count(50), 128);
        assert_eq!(h.count(200), 128);
        assert_eq!(h.total(), 256);
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(GrayImage::new(0, 4, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn crop_bounds_checked() {
        let img = GrayImage::filled(4, 4, 1);
        assert!(img.crop(2, 2, 3, 1).is_err());
        assert_eq!(img.crop(1, 1, 3, 3).unwrap().width(), 3);
    }

    proptest! {
        #[test]
        fn histogram_mass_conservation(
            w in 1u32..40,
            h in 1u32..40,
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = crate::seeding::rng_from_seed(seed);
            let img = GrayImage::from_fn(w, h, |_, _| rng.gen());
            let hist = histogram(&img);
            prop_assert_eq!(hist.total(), w as u64 * h as u64);
            prop_assert_eq!(hist.bins().iter().sum::<u64>(), w as u64 * h as u64);
        }

        #[test]
        fn grayscale_idempotent_on_gray(
            w in 1u32..16,
            h in 1u32..16,
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = crate::seeding::rng_from_seed(seed);
            let gray = GrayImage::from_fn(w, h, |_, _| rng.gen());
            let as_rgb = RgbImage::new(
                w,
                h,
                gray.data().iter().flat_map(|&g| [g, g, g]).collect(),
            ).unwrap();
            prop_assert_eq!(to_grayscale(&as_rgb), gray);
        }
    }
}
