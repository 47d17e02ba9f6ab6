//! Synthetic speckle image generation with controlled contrast.
//!
//! An image is built from the squared modulus of a circular complex
//! Gaussian field: the field is optionally Gaussian-blurred (which sets the
//! spatial grain scale), squared, renormalized to unit sample mean, and
//! mixed as `I = mu*(1-w) + mu*w*X`. Blurring the complex field leaves the
//! per-pixel intensity distribution exponential, so `X` keeps unit standard
//! deviation and the measured contrast `sigma/mean` approaches `w` at any
//! grain radius; grain size and contrast are therefore independent knobs.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, GrayImage};
use crate::seeding::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleParams {
    pub width: u32,
    pub height: u32,
    /// Target contrast `w` in [0, 1].
    pub target_contrast: f64,
    /// Gaussian blur radius (in pixels) applied to the complex field.
    pub grain_radius: f64,
    /// Mean intensity `mu` in (0, 255).
    pub mean_level: f64,
    pub seed: u64,
}

impl SpeckleParams {
    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if !(0.0..=1.0).contains(&self.target_contrast) {
            return Err(Error::invalid(format!(
                "target contrast must lie in [0, 1], got {}",
                self.target_contrast
            )));
        }
        if !self.grain_radius.is_finite() || self.grain_radius < 0.0 {
            return Err(Error::invalid(format!(
                "grain radius must be finite and non-negative, got {}",
                self.grain_radius
            )));
        }
        if !(self.mean_level > 0.0 && self.mean_level < 255.0) {
            return Err(Error::invalid(format!(
                "mean level must lie in (0, 255), got {}",
                self.mean_level
            )));
        }
        Ok(())
    }
}

/// First- and second-moment summary of an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleStats {
    pub sigma: f64,
    pub mean_intensity: f64,
    pub contrast: f64,
}

/// Population standard deviation, mean, and their ratio `C = sigma/mean`.
pub fn measure_contrast(img: &GrayImage) -> Result<SpeckleStats> {
    let data = img.data();
    let n = data.len() as f64;
    let mean = data.iter().map(|&p| p as u64).sum::<u64>() as f64 / n;
    if mean == 0.0 {
        return Err(Error::ZeroMeanIntensity);
    }
    let var = data
        .iter()
        .map(|&p| (p as f64 - mean) * (p as f64 - mean))
        .sum::<f64>()
        / n;
    let sigma = var.sqrt();
    Ok(SpeckleStats {
        sigma,
        mean_intensity: mean,
        contrast: sigma / mean,
    })
}

/// A generated image with the fraction of pixels that fell outside [0, 255]
/// before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSpeckle {
    pub image: GrayImage,
    pub clip_fraction: f64,
}

/// Generate one speckle image; identical parameters give identical bytes.
pub fn generate_speckle(p: &SpeckleParams) -> Result<GeneratedSpeckle> {
    p.validate()?;
    let (w, h) = (p.width as usize, p.height as usize);
    let n = w * h;
    let mut rng = seeding::rng_from_seed(p.seed);
    let mut re = vec![0.0f64; n];
    let mut im = vec![0.0f64; n];
    for i in 0..n {
        let (a, b) = normal_pair(&mut rng);
        re[i] = a;
        im[i] = b;
    }
    if p.grain_radius > 0.0 {
        let kernel = gaussian_kernel(p.grain_radius);
        blur_wrap(&mut re, w, h, &kernel);
        blur_wrap(&mut im, w, h, &kernel);
    }
    // |Z|^2 with E = 1 for the unblurred field, then renormalized so the
    // sample mean is exactly 1.
    let mut field: Vec<f64> = re
        .iter()
        .zip(&im)
        .map(|(&a, &b)| (a * a + b * b) / 2.0)
        .collect();
    let sample_mean = field.iter().sum::<f64>() / n as f64;
    for x in field.iter_mut() {
        *x /= sample_mean;
    }

    let mu = p.mean_level;
    let wgt = p.target_contrast;
    let mut clipped = 0usize;
    let data = field
        .iter()
        .map(|&x| {
            let v = (mu * (1.0 - wgt) + mu * wgt * x).round();
            if !(0.0..=255.0).contains(&v) {
                clipped += 1;
            }
            v.clamp(0.0, 255.0) as u8
        })
        .collect();
    Ok(GeneratedSpeckle {
        image: GrayImage::new(p.width, p.height, data)?,
        clip_fraction: clipped as f64 / n as f64,
    })
}

fn normal_pair(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let theta = 2.0 * PI * u2;
    (r * theta.cos(), r * theta.sin())
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= total;
    }
    k
}

/// Separable convolution with periodic boundaries, preserving stationarity.
fn blur_wrap(field: &mut [f64], w: usize, h: usize, kernel: &[f64]) {
    let half = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0f64; field.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - half).rem_euclid(w as i64) as usize;
                acc += kv * field[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = (y as i64 + k as i64 - half).rem_euclid(h as i64) as usize;
                acc += kv * tmp[sy * w + x];
            }
            field[y * w + x] = acc;
        }
    }
}

/// One image of a generated corpus.
#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub id: String,
    pub class: u8,
    pub image: GrayImage,
    pub params: SpeckleParams,
    pub stats: SpeckleStats,
    pub clip_fraction: f64,
}

/// A labeled, seed-reproducible image set.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub seed: u64,
    pub images: Vec<CorpusImage>,
}

/// The default three-class parameter set: contrast/grain pairs (0.9, 1),
/// (0.7, 2), (0.5, 4) at mean level 30.
pub fn preset3(width: u32, height: u32) -> Vec<SpeckleParams> {
    [(0.9, 1.0), (0.7, 2.0), (0.5, 4.0)]
        .into_iter()
        .map(|(w, g)| SpeckleParams {
            width,
            height,
            target_contrast: w,
            grain_radius: g,
            mean_level: 30.0,
            seed: 0,
        })
        .collect()
}

/// Generate `images_per_class` images for each class template. Class labels
/// run 1..=n in template order; image `i` of class `c` draws from a stream
/// derived from `(seed, c, i)`, so the corpus is identical for a given seed
/// regardless of worker count.
pub fn make_corpus(
    classes: &[SpeckleParams],
    images_per_class: usize,
    seed: u64,
) -> Result<Corpus> {
    if classes.len() < 2 {
        return Err(Error::invalid("at least two classes are required"));
    }
    if images_per_class < 4 {
        return Err(Error::invalid(
            "at least four images per class are required",
        ));
    }
    let jobs: Vec<(u8, usize, SpeckleParams)> = classes
        .iter()
        .enumerate()
        .flat_map(|(ci, template)| {
            (0..images_per_class).map(move |i| {
                let mut params = *template;
                params.seed = seeding::derive_seed(seed, &[domain::SYNTH, ci as u64 + 1, i as u64]);
                ((ci + 1) as u8, i, params)
            })
        })
        .collect();
    let images = jobs
        .into_par_iter()
        .map(|(class, index, params)| {
            let generated = generate_speckle(&params)?;
            let stats = measure_contrast(&generated.image)?;
            Ok(CorpusImage {
                id: format!("class{class}_{index:02}"),
                class,
                image: generated.image,
                params,
                stats,
                clip_fraction: generated.clip_fraction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { seed, images })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub images: Vec<CorpusManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifestEntry {
    pub file: String,
    pub class: u8,
    pub params: SpeckleParams,
    pub stats: SpeckleStats,
    pub clip_fraction: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Write each image as `<id>.pgm` plus a `manifest.json` beside them.
/// Images whose clip fraction exceeds 5% carry a warning in their entry.
pub fn save_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(corpus.images.len());
    for img in &corpus.images {
        let file = format!("{}.pgm", img.id);
        raster::io::save_gray(&img.image, dir.join(&file))?;
        let mut warnings = Vec::new();
        if img.clip_fraction > 0.05 {
            warnings.push(format!(
                "clip fraction {:.4} exceeds 0.05; intensities saturated",
                img.clip_fraction
            ));
        }
        entries.push(CorpusManifestEntry {
            file,
            class: img.class,
            params: img.params,
            stats: img.stats,
            clip_fraction: img.clip_fraction,
            warnings,
        });
    }
    let manifest = CorpusManifest {
        seed: corpus.seed,
        images: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Read a corpus saved by [`save_corpus`].
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let raw = fs::read_to_string(&manifest_path).map_err(|source| Error::UnreadableFile {
        path: manifest_path.clone(),
        source,
    })?;
    let manifest: CorpusManifest = serde_json::from_str(&raw)?;
    let mut images = Vec::with_capacity(manifest.images.len());
    for entry in manifest.images {
        let image = raster::io::load_gray(dir.join(&entry.file))?;
        let id = entry
            .file
            .strip_suffix(".pgm")
            .unwrap_or(&entry.file)
            .to_string();
        images.push(CorpusImage {
            id,
            class: entry.class,
            image,
            params: entry.params,
            stats: entry.stats,
            clip_fraction: entry.clip_fraction,
        });
    }
    Ok(Corpus {
        seed: manifest.seed,
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{glcm_image, haralick_five, GLCM_OFFSETS};

    fn params(w: f64, grain: f64, side: u32, seed: u64) -> SpeckleParams {
        SpeckleParams {
            width: side,
            height: side,
            target_contrast: w,
            grain_radius: grain,
            mean_level: 30.0,
            seed,
        }
    }

    #[test]
    fn constant_image_has_zero_contrast() {
        let img = GrayImage::filled(8, 8, 90);
        let stats = measure_contrast(&img).unwrap();
        assert_eq!(stats.contrast, 0.0);
        assert_eq!(stats.mean_intensity, 90.0);
    }

    #[test]
    fn balanced_two_value_image_has_unit_contrast() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 0 } else { 100 });
        let stats = measure_contrast(&img).unwrap();
        assert_eq!(stats.mean_intensity, 50.0);
        assert_eq!(stats.sigma, 50.0);
        assert_eq!(stats.contrast, 1.0);
    }

    #[test]
    fn all_zero_image_is_an_error() {
        let img = GrayImage::filled(4, 4, 0);
        assert!(matches!(
            measure_contrast(&img).unwrap_err(),
            Error::ZeroMeanIntensity
        ));
    }

    #[test]
    fn zero_contrast_yields_constant_mean_level() {
        let generated = generate_speckle(&params(0.0, 0.0, 32, 5)).unwrap();
        assert!(generated.image.data().iter().all(|&p| p == 30));
        assert_eq!(generated.clip_fraction, 0.0);
    }

    #[test]
    fn half_contrast_measures_near_half() {
        let generated = generate_speckle(&params(0.5, 0.0, 512, 9)).unwrap();
        let c = measure_contrast(&generated.image).unwrap().contrast;
        assert!((c - 0.5).abs() < 0.02, "contrast {c}");
    }

    #[test]
    fn fully_developed_measures_near_one() {
        let generated = generate_speckle(&params(1.0, 0.0, 512, 10)).unwrap();
        let c = measure_contrast(&generated.image).unwrap().contrast;
        assert!((c - 1.0).abs() < 0.03, "contrast {c}");
    }

    #[test]
    fn contrast_tracks_target_within_sampling_error() {
        let side = 256u32;
        let tol_base = 3.0 / (side as f64 * side as f64).sqrt();
        for &w in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            for seed in 0..10u64 {
                let generated = generate_speckle(&params(w, 0.0, side, 1000 + seed)).unwrap();
                let c = measure_contrast(&generated.image).unwrap().contrast;
                let tol = tol_base * (1.0 + w);
                assert!(
                    (c - w).abs() <= tol,
                    "w={w} seed={seed}: contrast {c}, tolerance {tol}"
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = params(0.7, 2.0, 64, 77);
        let a = generate_speckle(&p).unwrap();
        let b = generate_speckle(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finer_grain_has_larger_glcm_contrast() {
        for seed in 0..20u64 {
            let fine = generate_speckle(&params(0.7, 1.0, 96, 2000 + seed)).unwrap();
            let coarse = generate_speckle(&params(0.7, 4.0, 96, 2000 + seed)).unwrap();
            let of = |img: &GrayImage| {
                haralick_five(&glcm_image(img, 8, &GLCM_OFFSETS, true).unwrap()).contrast
            };
            let (cf, cc) = (of(&fine.image), of(&coarse.image));
            assert!(cf > cc, "seed {seed}: fine {cf} vs coarse {cc}");
        }
    }

    #[test]
    fn preset_grid_contrast_strictly_ordered() {
        // Classes walk down the (contrast, grain) grid together; measured
        // contrast must track the target and preserve the ordering.
        let corpus = make_corpus(&preset3(128, 128), 4, 17).unwrap();
        let mut mean_c = [0.0f64; 3];
        for img in &corpus.images {
            mean_c[img.class as usize - 1] += img.stats.contrast / 4.0;
        }
        assert!(
            mean_c[0] > mean_c[1] && mean_c[1] > mean_c[2],
            "contrast means {mean_c:?}"
        );
        for (i, &target) in [0.9, 0.7, 0.5].iter().enumerate() {
            assert!(
                (mean_c[i] - target).abs() < 0.1,
                "class {}: mean contrast {} vs target {target}",
                i + 1,
                mean_c[i]
            );
        }
    }

    #[test]
    fn corpus_has_expected_shape_and_repeats_exactly() {
        let classes = preset3(48, 48);
        let a = make_corpus(&classes, 4, 11).unwrap();
        assert_eq!(a.images.len(), 12);
        let mut counts = [0usize; 4];
        for img in &a.images {
            counts[img.class as usize] += 1;
        }
        assert_eq!(&counts[1..], &[4, 4, 4]);

        let b = make_corpus(&classes, 4, 11).unwrap();
        for (x, y) in a.images.iter().zip(&b.images) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.id, y.id);
        }
    }

    #[test]
    fn preset_classes_order_glcm_entropy() {
        let corpus = make_corpus(&preset3(128, 128), 4, 21).unwrap();
        let mut mean_entropy = [0.0f64; 3];
        for img in &corpus.images {
            let h = haralick_five(&glcm_image(&img.image, 8, &GLCM_OFFSETS, true).unwrap());
            mean_entropy[img.class as usize - 1] += h.entropy / 4.0;
        }
        assert!(
            mean_entropy[0] > mean_entropy[1] && mean_entropy[1] > mean_entropy[2],
            "entropy means {mean_entropy:?}"
        );
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = make_corpus(&preset3(32, 32), 4, 31).unwrap();
        save_corpus(&corpus, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded.seed, corpus.seed);
        assert_eq!(loaded.images.len(), corpus.images.len());
        for (a, b) in corpus.images.iter().zip(&loaded.images) {
            assert_eq!(a.image, b.image);
            assert_eq!(a.class, b.class);
            assert_eq!(a.id, b.id);
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn heavy_clipping_is_warned_in_manifest() {
        let p = SpeckleParams {
            width: 64,
            height: 64,
            target_contrast: 1.0,
            grain_radius: 0.0,
            mean_level: 200.0,
            seed: 3,
        };
        let generated = generate_speckle(&p).unwrap();
        assert!(
            generated.clip_fraction > 0.05,
            "{}",
            generated.clip_fraction
        );

        let corpus = Corpus {
            seed: 3,
            images: vec![CorpusImage {
                id: "clip_00".into(),
                class: 1,
                image: generated.image,
                params: p,
                stats: SpeckleStats {
                    sigma: 0.0,
                    mean_intensity: 1.0,
                    contrast: 0.0,
                },
                clip_fraction: generated.clip_fraction,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&corpus, dir.path()).unwrap();
        let raw = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(raw.contains("clip fraction"), "manifest: {raw}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(generate_speckle(&params(1.5, 0.0, 8, 0)).is_err());
        assert!(generate_speckle(&params(-0.1, 0.0, 8, 0)).is_err());
        assert!(generate_speckle(&params(0.5, -1.0, 8, 0)).is_err());
        let mut p = params(0.5, 0.0, 8, 0);
        p.mean_level = 0.0;
        assert!(generate_speckle(&p).is_err());
        p.mean_level = 255.0;
        assert!(generate_speckle(&p).is_err());
        assert!(make_corpus(&preset3(16, 16)[..1], 4, 0).is_err());
        assert!(make_corpus(&preset3(16, 16), 3, 0).is_err());
    }
}
