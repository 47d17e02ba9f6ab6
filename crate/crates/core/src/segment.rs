//! Histogram valley detection and intensity-based segmentation.
//!
//! Two template builders share one histogram analysis: [`threshold_segment`]
//! bands pixels at the detected valley intensities, and [`kmeans_segment`]
//! clusters intensities with seeded, restarted 1-D k-means. Both produce a
//! [`SegmentationTemplate`] whose labels ascend with intensity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{histogram, GrayImage, Histogram};
use crate::seeding::{self, domain};

/// Peaks and valleys of a smoothed 256-bin histogram.
///
/// Invariant: `valleys` strictly interleaves `peaks`, and
/// `valleys.len() == peaks.len() - 1` whenever there are two or more peaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValleyReport {
    pub smoothed_bins: Vec<f64>,
    pub peaks: Vec<u8>,
    pub valleys: Vec<u8>,
}

/// How a template was produced, with the parameters needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SegmentationMethod {
    Threshold { thresholds: Vec<u8> },
    Kmeans { centers: Vec<f64> },
}

impl SegmentationMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentationMethod::Threshold { .. } => "threshold",
            SegmentationMethod::Kmeans { .. } => "kmeans",
        }
    }
}

/// A per-pixel region labeling with labels in `[0, regions)`.
///
/// Labels ascend with source intensity for both construction methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationTemplate {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    regions: usize,
    method: SegmentationMethod,
}

impl SegmentationTemplate {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major labels, `width * height` entries, each `< regions`.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn method(&self) -> &SegmentationMethod {
        &self.method
    }

    pub fn label(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "label out of bounds");
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Build a template directly from labels produced elsewhere (e.g. by
    /// matching a template from another image of the same scene).
    pub fn from_labels(
        width: u32,
        height: u32,
        labels: Vec<u8>,
        regions: usize,
        method: SegmentationMethod,
    ) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "label buffer holds {} entries, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        if regions == 0 || labels.iter().any(|&l| l as usize >= regions) {
            return Err(Error::invalid("labels must all be below the region count"));
        }
        Ok(Self {
            width,
            height,
            labels,
            regions,
            method,
        })
    }

    /// Render the labeling as an image, spreading labels across [0, 255].
    pub fn to_gray(&self) -> GrayImage {
        let span = (self.regions.max(2) - 1) as u32;
        let data = self
            .labels
            .iter()
            .map(|&l| (l as u32 * 255 / span) as u8)
            .collect();
        GrayImage::new(self.width, self.height, data).expect("label buffer matches dimensions")
    }
}

/// Smooth the histogram with a centered moving average, then report local
/// maxima filtered by topographic prominence and the minima between them.
///
/// Bins beyond either end count as zero; the divisor is always `window`.
/// A plateau of equal maxima reports its center bin. Prominence of a peak is
/// its height minus the higher of the two minima separating it from the
/// nearest higher ground on each side; peaks keep their place when that is
/// at least `min_prominence` times the tallest smoothed bin. Each valley is
/// the lowest bin strictly between consecutive peaks, ties toward the lower
/// intensity.
pub fn detect_valleys(
    h: &Histogram,
    smoothing_window: usize,
    min_prominence: f64,
) -> Result<ValleyReport> {
    if smoothing_window == 0 || smoothing_window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "smoothing window must be odd and at least 1, got {smoothing_window}"
        )));
    }
    if !(0.0..1.0).contains(&min_prominence) {
        return Err(Error::invalid(format!(
            "min prominence must lie in [0, 1), got {min_prominence}"
        )));
    }
    let smoothed = moving_average(h.bins(), smoothing_window);
    let tallest = smoothed.iter().cloned().fold(0.0f64, f64::max);
    let peaks: Vec<u8> = plateau_maxima(&smoothed)
        .into_iter()
        .filter(|&p| prominence(&smoothed, p) >= min_prominence * tallest)
        .map(|p| p as u8)
        .collect();
    let valleys = minima_between(&smoothed, &peaks);
    Ok(ValleyReport {
        smoothed_bins: smoothed,
        peaks,
        valleys,
    })
}

fn moving_average(bins: &[u64], window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let n = bins.len() as isize;
    (0..n)
        .map(|i| {
            let mut sum = 0u64;
            for j in (i - r)..=(i + r) {
                if (0..n).contains(&j) {
                    sum += bins[j as usize];
                }
            }
            sum as f64 / window as f64
        })
        .collect()
}

/// Indices of strict local maxima; a flat run surrounded by lower values
/// yields its center index. Values beyond the ends count as zero.
fn plateau_maxima(xs: &[f64]) -> Vec<usize> {
    let n = xs.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let v = xs[i];
        let left = if i == 0 { 0.0 } else { xs[i - 1] };
        if v <= 0.0 || left >= v {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && xs[j + 1] == v {
            j += 1;
        }
        let right = if j + 1 == n { 0.0 } else { xs[j + 1] };
        if right < v {
            peaks.push((i + j) / 2);
        }
        i = j + 1;
    }
    peaks
}

fn prominence(xs: &[f64], peak: usize) -> f64 {
    let h = xs[peak];
    let mut left_min = h;
    let mut i = peak;
    while i > 0 {
        i -= 1;
        if xs[i] > h {
            break;
        }
        left_min = left_min.min(xs[i]);
    }
    let mut right_min = h;
    let mut i = peak;
    while i + 1 < xs.len() {
        i += 1;
        if xs[i] > h {
            break;
        }
        right_min = right_min.min(xs[i]);
    }
    h - left_min.max(right_min)
}

fn minima_between(xs: &[f64], peaks: &[u8]) -> Vec<u8> {
    peaks
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] as usize, w[1] as usize);
            let mut best = a + 1;
            for i in a + 1..b {
                if xs[i] < xs[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect()
}

/// Band pixels by counting how many thresholds each meets: a pixel `p` gets
/// label `|{t : p >= t}|`, so `n` thresholds yield `n + 1` bands. An empty
/// list yields a single-band template.
pub fn threshold_segment(img: &GrayImage, thresholds: &[u8]) -> Result<SegmentationTemplate> {
    if thresholds.first().is_some_and(|&t| t == 0) {
        return Err(Error::invalid("thresholds must lie in [1, 255]"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("thresholds must be strictly ascending"));
    }
    let mut lut = [0u8; 256];
    for (p, slot) in lut.iter_mut().enumerate() {
        *slot = thresholds.iter().filter(|&&t| p as u8 >= t).count() as u8;
    }
    let labels = img.data().iter().map(|&p| lut[p as usize]).collect();
    Ok(SegmentationTemplate {
        width: img.width(),
        height: img.height(),
        labels,
        regions: thresholds.len() + 1,
        method: SegmentationMethod::Threshold {
            thresholds: thresholds.to_vec(),
        },
    })
}

/// Cluster intensities with 1-D k-means and label pixels by ascending
/// cluster center.
///
/// The clustering runs on the 256-bin histogram (occupied intensities
/// weighted by their counts), which gives the same result as clustering the
/// pixel list directly. Each restart draws its initialization from a seed
/// derived from the restart index alone, so restart `r` of any invocation
/// with the same base seed explores the same start; the restart with the
/// lowest within-cluster squared error wins.
pub fn kmeans_segment(
    img: &GrayImage,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<SegmentationTemplate> {
    if k == 0 || k > 255 {
        return Err(Error::invalid(format!(
            "cluster count must lie in [1, 255], got {k}"
        )));
    }
    if restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let hist = histogram(img);
    let occupied: Vec<(f64, u64)> = hist
        .bins()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(v, &c)| (v as f64, c))
        .collect();
    if k > occupied.len() {
        return Err(Error::DegenerateClustering {
            clusters: k,
            distinct: occupied.len(),
        });
    }

    let mut best: Option<KmeansRun> = None;
    for r in 0..restarts {
        let mut rng =
            seeding::rng_from_seed(seeding::derive_seed(seed, &[domain::KMEANS, r as u64]));
        let init = kmeanspp_init(&occupied, k, &mut rng);
        let run = lloyd(&occupied, init);
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    let run = best.expect("restarts >= 1");

    // Renumber so cluster 0 has the lowest center.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        run.centers[a]
            .partial_cmp(&run.centers[b])
            .expect("centers are finite")
            .then(a.cmp(&b))
    });
    let mut rank = vec![0u8; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new as u8;
    }
    let mut lut = [0u8; 256];
    for (i, &(v, _)) in occupied.iter().enumerate() {
        lut[v as usize] = rank[run.assign[i]];
    }
    let labels = img.data().iter().map(|&p| lut[p as usize]).collect();
    let centers = order.iter().map(|&i| run.centers[i]).collect();
    Ok(SegmentationTemplate {
        width: img.width(),
        height: img.height(),
        labels,
        regions: k,
        method: SegmentationMethod::Kmeans { centers },
    })
}

struct KmeansRun {
    sse: f64,
    centers: Vec<f64>,
    assign: Vec<usize>,
    #[cfg_attr(not(test), allow(dead_code))]
    sse_trace: Vec<f64>,
}

/// Weighted k-means++ seeding: the first center is drawn with probability
/// proportional to bin count, later centers proportional to count times
/// squared distance to the nearest chosen center. Centers are always
/// distinct occupied intensities.
fn kmeanspp_init(points: &[(f64, u64)], k: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let total: u64 = points.iter().map(|&(_, c)| c).sum();
    let mut pick = rng.gen_range(0..total);
    let mut centers = Vec::with_capacity(k);
    for &(v, c) in points {
        if pick < c {
            centers.push(v);
            break;
        }
        pick -= c;
    }
    while centers.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|&(v, c)| {
                let d2 = centers
                    .iter()
                    .map(|&ctr| (v - ctr) * (v - ctr))
                    .fold(f64::INFINITY, f64::min);
                c as f64 * d2
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        let target = rng.gen::<f64>() * sum;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(i);
            if acc >= target {
                break;
            }
        }
        centers.push(points[chosen.expect("more distinct points than centers")].0);
    }
    centers
}

fn assign_nearest(points: &[(f64, u64)], centers: &[f64]) -> Vec<usize> {
    points
        .iter()
        .map(|&(v, _)| {
            let mut best = 0;
            let mut best_d = (v - centers[0]).abs();
            for (j, &c) in centers.iter().enumerate().skip(1) {
                let d = (v - c).abs();
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn weighted_sse(points: &[(f64, u64)], centers: &[f64], assign: &[usize]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(&(v, c), &a)| c as f64 * (v - centers[a]) * (v - centers[a]))
        .sum()
}

fn lloyd(points: &[(f64, u64)], mut centers: Vec<f64>) -> KmeansRun {
    let k = centers.len();
    let mut assign = assign_nearest(points, &centers);
    let mut sse_trace = vec![weighted_sse(points, &centers, &assign)];
    for _ in 0..100 {
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0u64; k];
        for (&(v, c), &a) in points.iter().zip(&assign) {
            sums[a] += v * c as f64;
            counts[a] += c;
        }
        for j in 0..k {
            // A cluster emptied by reassignment keeps its center.
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            }
        }
        let next = assign_nearest(points, &centers);
        sse_trace.push(weighted_sse(points, &centers, &next));
        if next == assign {
            break;
        }
        assign = next;
    }
    KmeansRun {
        sse: *sse_trace.last().expect("trace is non-empty"),
        centers,
        assign,
        sse_trace,
    }
}
