//! Texture features over sample windows.
//!
//! Four local operators (root-sum-square neighbor difference, local
//! variance, local sigma, local skewness) are evaluated per pixel over 3x3
//! and 5x5 neighborhoods and averaged over the interior where the full
//! neighborhood fits. Together with whole-window mean, median, and standard
//! deviation they form the eleven-feature set; adding mean intensity and
//! five co-occurrence features yields the seventeen-feature set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::sampling::SampleWindow;

/// Canonical feature order. The eleven-feature set is the first 11 names.
pub const SEVENTEEN_NAMES: [&str; 17] = [
    "variance_russ_3",
    "variance_levine_3",
    "sigma_3",
    "skewness_3",
    "variance_russ_5",
    "variance_levine_5",
    "sigma_5",
    "skewness_5",
    "mean",
    "median",
    "stddev",
    "intensity",
    "glcm_contrast",
    "glcm_correlation",
    "glcm_energy",
    "glcm_homogeneity",
    "glcm_entropy",
];

pub const ELEVEN_NAMES: [&str; 11] = [
    "variance_russ_3",
    "variance_levine_3",
    "sigma_3",
    "skewness_3",
    "variance_russ_5",
    "variance_levine_5",
    "sigma_5",
    "skewness_5",
    "mean",
    "median",
    "stddev",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Eleven,
    Seventeen,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        match self {
            FeatureSet::Eleven => 11,
            FeatureSet::Seventeen => 17,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &'static [&'static str] {
        &SEVENTEEN_NAMES[..self.len()]
    }
}

/// Feature values in the order of [`SEVENTEEN_NAMES`] (or its 11-name prefix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    set_kind: FeatureSet,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(set_kind: FeatureSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != set_kind.len() {
            return Err(Error::invalid(format!(
                "{} values supplied for a {}-feature vector",
                values.len(),
                set_kind.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {bad}")));
        }
        Ok(Self { set_kind, values })
    }

    pub fn set_kind(&self) -> FeatureSet {
        self.set_kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &'static [&'static str] {
        self.set_kind.names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let idx = self.names().iter().position(|&n| n == name)?;
        Some(self.values[idx])
    }

    /// Project the seventeen-feature vector onto the eleven-name prefix.
    pub fn truncate_to_eleven(&self) -> FeatureVector {
        FeatureVector {
            set_kind: FeatureSet::Eleven,
            values: self.values[..11].to_vec(),
        }
    }
}

fn check_neighborhood(img: &GrayImage, n: u32) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "neighborhood must be odd and at least 3, got {n}"
        )));
    }
    if img.width() < n || img.height() < n {
        return Err(Error::invalid(format!(
            "{}x{} window is smaller than a {n}x{n} neighborhood",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

fn interior_mean(img: &GrayImage, n: u32, per_pixel: impl Fn(u32, u32) -> f64) -> f64 {
    let r = n / 2;
    let mut sum = 0.0;
    let mut count = 0u64;
    for y in r..img.height() - r {
        for x in r..img.width() - r {
            sum += per_pixel(x, y);
            count += 1;
        }
    }
    sum / count as f64
}

fn local_mean(img: &GrayImage, x: u32, y: u32, r: u32) -> f64 {
    let n = 2 * r + 1;
    let mut sum = 0u64;
    for dy in 0..n {
        for dx in 0..n {
            sum += img.get(x - r + dx, y - r + dy) as u64;
        }
    }
    sum as f64 / (n * n) as f64
}

fn levine_at(img: &GrayImage, x: u32, y: u32, r: u32) -> f64 {
    let n = 2 * r + 1;
    let m = local_mean(img, x, y, r);
    let mut acc = 0.0;
    for dy in 0..n {
        for dx in 0..n {
            let d = img.get(x - r + dx, y - r + dy) as f64 - m;
            acc += d * d;
        }
    }
    acc / (n * n) as f64
}

/// Root of the summed squared differences between each interior pixel and
/// every other pixel in its neighborhood, averaged over the interior.
pub fn variance_russ(w: &SampleWindow, neighborhood: u32) -> Result<f64> {
    let img = w.pixels();
    check_neighborhood(img, neighborhood)?;
    let r = neighborhood / 2;
    Ok(interior_mean(img, neighborhood, |x, y| {
        let center = img.get(x, y) as f64;
        let mut acc = 0.0;
        for dy in 0..neighborhood {
            for dx in 0..neighborhood {
                if dx == r && dy == r {
                    continue;
                }
                let d = center - img.get(x - r + dx, y - r + dy) as f64;
                acc += d * d;
            }
        }
        acc.sqrt()
    }))
}

/// Mean over interior pixels of the neighborhood variance around each pixel.
pub fn variance_levine(w: &SampleWindow, neighborhood: u32) -> Result<f64> {
    let img = w.pixels();
    check_neighborhood(img, neighborhood)?;
    let r = neighborhood / 2;
    Ok(interior_mean(img, neighborhood, |x, y| {
        levine_at(img, x, y, r)
    }))
}

/// Mean over interior pixels of the neighborhood standard deviation.
pub fn sigma(w: &SampleWindow, neighborhood: u32) -> Result<f64> {
    let img = w.pixels();
    check_neighborhood(img, neighborhood)?;
    let r = neighborhood / 2;
    Ok(interior_mean(img, neighborhood, |x, y| {
        levine_at(img, x, y, r).sqrt()
    }))
}

/// Mean over interior pixels of the neighborhood skewness. Neighborhoods
/// with zero variance contribute 0.
pub fn skewness(w: &SampleWindow, neighborhood: u32) -> Result<f64> {
    let img = w.pixels();
    check_neighborhood(img, neighborhood)?;
    let r = neighborhood / 2;
    let n2 = (neighborhood * neighborhood) as f64;
    Ok(interior_mean(img, neighborhood, |x, y| {
        let var = levine_at(img, x, y, r);
        if var == 0.0 {
            return 0.0;
        }
        let m = local_mean(img, x, y, r);
        let mut acc = 0.0;
        for dy in 0..neighborhood {
            for dx in 0..neighborhood {
                let d = img.get(x - r + dx, y - r + dy) as f64 - m;
                acc += d * d * d;
            }
        }
        acc / n2 / var.powf(1.5)
    }))
}

/// Mean gray level over the whole window.
pub fn mean(w: &SampleWindow) -> f64 {
    let data = w.pixels().data();
    data.iter().map(|&p| p as u64).sum::<u64>() as f64 / data.len() as f64
}

/// Median gray level; even-length windows take the lower middle value.
pub fn median(w: &SampleWindow) -> f64 {
    let mut data = w.pixels().data().to_vec();
    data.sort_unstable();
    data[(data.len() - 1) / 2] as f64
}

/// Population standard deviation over the whole window.
pub fn std_dev(w: &SampleWindow) -> f64 {
    let data = w.pixels().data();
    let n = data.len() as f64;
    let m = data.iter().map(|&p| p as u64).sum::<u64>() as f64 / n;
    let acc: f64 = data.iter().map(|&p| (p as f64 - m) * (p as f64 - m)).sum();
    (acc / n).sqrt()
}

/// Offsets for the four unit directions at 0, 45, 90, and 135 degrees.
pub const GLCM_OFFSETS: [(i32, i32); 4] = [(1, 0), (1, -1), (0, 1), (1, 1)];

/// One direction of a co-occurrence matrix: raw pair counts plus the
/// count-normalized probabilities (sum 1).
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmDirection {
    pub offset: (i32, i32),
    pub counts: Vec<u64>,
    pub probs: Vec<f64>,
}

/// Gray-level co-occurrence matrices, one per retained direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    directions: Vec<GlcmDirection>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn directions(&self) -> &[GlcmDirection] {
        &self.directions
    }
}

/// Build co-occurrence matrices after quantizing to `levels` gray bins
/// (`q = p * levels / 256`). With `symmetric` each pair is counted in both
/// orders. Directions with no valid pairs are dropped; losing every
/// direction is an error.
pub fn glcm(
    w: &SampleWindow,
    levels: usize,
    offsets: &[(i32, i32)],
    symmetric: bool,
) -> Result<Glcm> {
    glcm_image(w.pixels(), levels, offsets, symmetric)
}

/// [`glcm`] over a bare image, for callers without a [`SampleWindow`].
pub fn glcm_image(
    img: &GrayImage,
    levels: usize,
    offsets: &[(i32, i32)],
    symmetric: bool,
) -> Result<Glcm> {
    if levels == 0 || 256 % levels != 0 {
        return Err(Error::invalid(format!(
            "levels must divide 256, got {levels}"
        )));
    }
    if offsets.is_empty() {
        return Err(Error::invalid("at least one offset is required"));
    }
    let (width, height) = (img.width() as i64, img.height() as i64);
    let quant = |p: u8| (p as usize * levels) / 256;
    let mut directions = Vec::new();
    for &(dx, dy) in offsets {
        let mut counts = vec![0u64; levels * levels];
        let mut total = 0u64;
        for y in 0..height {
            for x in 0..width {
                let (nx, ny) = (x + dx as i64, y + dy as i64);
                if nx < 0 || ny < 0 || nx >= width || ny >= height {
                    continue;
                }
                let a = quant(img.get(x as u32, y as u32));
                let b = quant(img.get(nx as u32, ny as u32));
                counts[a * levels + b] += 1;
                total += 1;
                if symmetric {
                    counts[b * levels + a] += 1;
                    total += 1;
                }
            }
        }
        if total == 0 {
            continue;
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        directions.push(GlcmDirection {
            offset: (dx, dy),
            counts,
            probs,
        });
    }
    if directions.is_empty() {
        return Err(Error::invalid(
            "no offset yields co-occurring pairs in this window",
        ));
    }
    Ok(Glcm { levels, directions })
}

/// The five co-occurrence features, averaged over directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaralickFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub entropy: f64,
}

/// Per direction: contrast `sum p*(i-j)^2`, correlation
/// `sum p*(i-ux)(j-uy)/(sx*sy)` (1 when `sx*sy` is 0), energy `sum p^2`,
/// homogeneity `sum p/(1+|i-j|)`, entropy `-sum p*log2 p` with `0*log 0 = 0`.
/// The returned features are means over the directions.
pub fn haralick_five(g: &Glcm) -> HaralickFeatures {
    let levels = g.levels();
    let mut acc = HaralickFeatures {
        contrast: 0.0,
        correlation: 0.0,
        energy: 0.0,
        homogeneity: 0.0,
        entropy: 0.0,
    };
    for dir in g.directions() {
        let p = |i: usize, j: usize| dir.probs[i * levels + j];
        let mut row_marginal = vec![0.0; levels];
        let mut col_marginal = vec![0.0; levels];
        #[allow(clippy::needless_range_loop)]
        for i in 0..levels {
            for j in 0..levels {
                row_marginal[i] += p(i, j);
                col_marginal[j] += p(i, j);
            }
        }
        let mean_of = |m: &[f64]| -> f64 { m.iter().enumerate().map(|(i, q)| i as f64 * q).sum() };
        let ux = mean_of(&row_marginal);
        let uy = mean_of(&col_marginal);
        let var_of = |m: &[f64], u: f64| -> f64 {
            m.iter()
                .enumerate()
                .map(|(i, q)| (i as f64 - u) * (i as f64 - u) * q)
                .sum()
        };
        let (sx, sy) = (
            var_of(&row_marginal, ux).sqrt(),
            var_of(&col_marginal, uy).sqrt(),
        );

        let (mut contrast, mut corr, mut energy, mut homog, mut entropy) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..levels {
            for j in 0..levels {
                let q = p(i, j);
                let d = i as f64 - j as f64;
                contrast += q * d * d;
                energy += q * q;
                homog += q / (1.0 + d.abs());
                if q > 0.0 {
                    entropy -= q * q.log2();
                    corr += q * (i as f64 - ux) * (j as f64 - uy);
                }
            }
        }
        let correlation = if sx * sy == 0.0 {
            1.0
        } else {
            corr / (sx * sy)
        };
        acc.contrast += contrast;
        acc.correlation += correlation;
        acc.energy += energy;
        acc.homogeneity += homog;
        acc.entropy += entropy;
    }
    let n = g.directions().len() as f64;
    HaralickFeatures {
        contrast: acc.contrast / n,
        correlation: acc.correlation / n,
        energy: acc.energy / n,
        homogeneity: acc.homogeneity / n,
        entropy: acc.entropy / n,
    }
}

/// Assemble the feature vector for one window.
///
/// Eleven: the four local operators at 3x3 and 5x5 plus mean, median, and
/// standard deviation. Seventeen: those eleven plus mean intensity and the
/// five co-occurrence features (8 levels, 4 directions, symmetric).
pub fn feature_vector(w: &SampleWindow, set_kind: FeatureSet) -> Result<FeatureVector> {
    let mut values = vec![
        variance_russ(w, 3)?,
        variance_levine(w, 3)?,
        sigma(w, 3)?,
        skewness(w, 3)?,
        variance_russ(w, 5)?,
        variance_levine(w, 5)?,
        sigma(w, 5)?,
        skewness(w, 5)?,
        mean(w),
        median(w),
        std_dev(w),
    ];
    if set_kind == FeatureSet::Seventeen {
        let h = haralick_five(&glcm(w, 8, &GLCM_OFFSETS, true)?);
        values.extend([
            mean(w),
            h.contrast,
            h.correlation,
            h.energy,
            h.homogeneity,
            h.entropy,
        ]);
    }
    FeatureVector::new(set_kind, values)
}
