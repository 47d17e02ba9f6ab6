//! Template matching and sample-window extraction.
//!
//! A [`SampleWindow`] is an s-by-s cutout tied to the region it was drawn
//! from. Windows are located in other images by normalized cross-correlation
//! or sum of squared differences; [`best_match`] is the exhaustive reference
//! scan and [`best_match_fast`] an integral-image formulation that must stay
//! within 1e-9 of it.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::seeding::{self, domain};
use crate::segment::SegmentationTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMetric {
    Ncc,
    Ssd,
}

/// A square cutout of a source image, tagged with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    origin: (u32, u32),
    pixels: GrayImage,
    source_id: String,
    region_label: u8,
}

impl SampleWindow {
    /// Cut an s-by-s window out of `img` at `(x, y)`.
    pub fn cut(
        img: &GrayImage,
        x: u32,
        y: u32,
        size: u32,
        source_id: &str,
        region_label: u8,
    ) -> Result<Self> {
        Ok(Self {
            origin: (x, y),
            pixels: img.crop(x, y, size, size)?,
            source_id: source_id.to_string(),
            region_label,
        })
    }

    pub fn origin(&self) -> (u32, u32) {
        self.origin
    }

    pub fn size(&self) -> u32 {
        self.pixels.width()
    }

    pub fn pixels(&self) -> &GrayImage {
        &self.pixels
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn region_label(&self) -> u8 {
        self.region_label
    }
}

/// Where a template matched and how well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchScore {
    pub position: (u32, u32),
    pub score: f64,
    pub metric: MatchMetric,
}

/// Normalized cross-correlation of the template against the region of `f`
/// whose top-left corner is `(u, v)`:
///
/// ```text
/// y(u, v) = sum[(f - mean_f)(t - mean_t)] / sqrt(sum[(f - mean_f)^2] * sum[(t - mean_t)^2])
/// ```
///
/// where `mean_f` is taken over the covered region only. The result lies in
/// [-1, 1]; a constant region or constant template has no defined value.
pub fn ncc_score(f: &GrayImage, t: &SampleWindow, u: u32, v: u32) -> Result<f64> {
    check_fit(f, t.pixels(), u, v)?;
    ncc_at(f, t.pixels(), u, v)
}

/// Sum of squared differences over the template support. Integer-exact.
pub fn ssd_score(f: &GrayImage, t: &SampleWindow, u: u32, v: u32) -> Result<f64> {
    check_fit(f, t.pixels(), u, v)?;
    Ok(ssd_at(f, t.pixels(), u, v) as f64)
}

fn check_fit(f: &GrayImage, t: &GrayImage, u: u32, v: u32) -> Result<()> {
    let fits = u64::from(u) + u64::from(t.width()) <= u64::from(f.width())
        && u64::from(v) + u64::from(t.height()) <= u64::from(f.height());
    if fits {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "template {}x{} does not fit at ({u}, {v}) in {}x{}",
            t.width(),
            t.height(),
            f.width(),
            f.height()
        )))
    }
}

fn ncc_at(f: &GrayImage, t: &GrayImage, u: u32, v: u32) -> Result<f64> {
    let (tw, th) = (t.width() as usize, t.height() as usize);
    let n = (tw * th) as f64;
    let mut fsum = 0u64;
    let mut tsum = 0u64;
    for dy in 0..th {
        let frow = &f.row(v + dy as u32)[u as usize..u as usize + tw];
        let trow = t.row(dy as u32);
        for dx in 0..tw {
            fsum += frow[dx] as u64;
            tsum += trow[dx] as u64;
        }
    }
    let fmean = fsum as f64 / n;
    let tmean = tsum as f64 / n;
    let mut num = 0.0;
    let mut df = 0.0;
    let mut dt = 0.0;
    for dy in 0..th {
        let frow = &f.row(v + dy as u32)[u as usize..u as usize + tw];
        let trow = t.row(dy as u32);
        for dx in 0..tw {
            let a = frow[dx] as f64 - fmean;
            let b = trow[dx] as f64 - tmean;
            num += a * b;
            df += a * a;
            dt += b * b;
        }
    }
    if df == 0.0 || dt == 0.0 {
        return Err(Error::UndefinedCorrelation { u, v });
    }
    Ok(num / (df.sqrt() * dt.sqrt()))
}

fn ssd_at(f: &GrayImage, t: &GrayImage, u: u32, v: u32) -> u64 {
    let (tw, th) = (t.width() as usize, t.height() as usize);
    let mut sum = 0u64;
    for dy in 0..th {
        let frow = &f.row(v + dy as u32)[u as usize..u as usize + tw];
        let trow = t.row(dy as u32);
        for dx in 0..tw {
            let d = frow[dx] as i64 - trow[dx] as i64;
            sum += (d * d) as u64;
        }
    }
    sum
}

/// Scan every valid placement and return the best score: highest for NCC
/// (placements with undefined correlation are skipped), lowest for SSD.
/// Ties go to the smallest `(v, u)` in row-major order. Rows are scanned in
/// parallel; the fold preserves the sequential tie-break.
pub fn best_match(f: &GrayImage, t: &SampleWindow, metric: MatchMetric) -> Result<MatchScore> {
    scan(f, t.pixels(), metric, |f, t, u, v| match metric {
        MatchMetric::Ncc => ncc_at(f, t, u, v).ok(),
        MatchMetric::Ssd => Some(ssd_at(f, t, u, v) as f64),
    })
}

/// [`best_match`] with sums taken from integral tables and zero-variance
/// placements detected exactly in integer arithmetic. Scores stay within
/// 1e-9 of the reference scan.
pub fn best_match_fast(f: &GrayImage, t: &SampleWindow, metric: MatchMetric) -> Result<MatchScore> {
    let tpl = t.pixels();
    check_fit(f, tpl, 0, 0)?;
    let (tw, th) = (tpl.width() as usize, tpl.height() as usize);
    let n = (tw * th) as i64;
    let st: i64 = tpl.data().iter().map(|&p| p as i64).sum();
    let stt: i64 = tpl.data().iter().map(|&p| p as i64 * p as i64).sum();
    let dt_int = n * stt - st * st;
    if metric == MatchMetric::Ncc && dt_int == 0 {
        return Err(Error::NoValidMatch);
    }
    let tables = Integrals::build(f);
    scan(f, tpl, metric, move |f, t, u, v| {
        let sft = cross_sum(f, t, u, v);
        match metric {
            MatchMetric::Ncc => {
                let sf = tables.sum(u, v, tw, th);
                let sff = tables.sq(u, v, tw, th);
                let df_int = n * sff - sf * sf;
                if df_int == 0 {
                    return None;
                }
                let num = (n * sft - sf * st) as f64;
                Some(num / ((df_int as f64).sqrt() * (dt_int as f64).sqrt()))
            }
            MatchMetric::Ssd => {
                let sff = tables.sq(u, v, tw, th);
                Some((sff - 2 * sft + stt) as f64)
            }
        }
    })
}

fn scan(
    f: &GrayImage,
    t: &GrayImage,
    metric: MatchMetric,
    score_at: impl Fn(&GrayImage, &GrayImage, u32, u32) -> Option<f64> + Sync,
) -> Result<MatchScore> {
    check_fit(f, t, 0, 0)?;
    let last_u = f.width() - t.width();
    let last_v = f.height() - t.height();
    let better = |a: f64, b: f64| match metric {
        MatchMetric::Ncc => a > b,
        MatchMetric::Ssd => a < b,
    };
    let row_best: Vec<Option<(u32, f64)>> = (0..=last_v)
        .into_par_iter()
        .map(|v| {
            let mut best: Option<(u32, f64)> = None;
            for u in 0..=last_u {
                if let Some(score) = score_at(f, t, u, v) {
                    if best.is_none_or(|(_, b)| better(score, b)) {
                        best = Some((u, score));
                    }
                }
            }
            best
        })
        .collect();
    let mut overall: Option<MatchScore> = None;
    for (v, entry) in row_best.into_iter().enumerate() {
        if let Some((u, score)) = entry {
            if overall.is_none_or(|m| better(score, m.score)) {
                overall = Some(MatchScore {
                    position: (u, v as u32),
                    score,
                    metric,
                });
            }
        }
    }
    overall.ok_or(Error::NoValidMatch)
}

fn cross_sum(f: &GrayImage, t: &GrayImage, u: u32, v: u32) -> i64 {
    let (tw, th) = (t.width() as usize, t.height() as usize);
    let mut sum = 0i64;
    for dy in 0..th {
        let frow = &f.row(v + dy as u32)[u as usize..u as usize + tw];
        let trow = t.row(dy as u32);
        for dx in 0..tw {
            sum += frow[dx] as i64 * trow[dx] as i64;
        }
    }
    sum
}

struct Integrals {
    stride: usize,
    sum: Vec<i64>,
    sq: Vec<i64>,
}

impl Integrals {
    fn build(f: &GrayImage) -> Self {
        let (w, h) = (f.width() as usize, f.height() as usize);
        let stride = w + 1;
        let mut sum = vec![0i64; stride * (h + 1)];
        let mut sq = vec![0i64; stride * (h + 1)];
        for y in 0..h {
            let row = f.row(y as u32);
            for (x, &pixel) in row.iter().enumerate() {
                let p = pixel as i64;
                let i = (y + 1) * stride + x + 1;
                sum[i] = p + sum[i - 1] + sum[i - stride] - sum[i - stride - 1];
                sq[i] = p * p + sq[i - 1] + sq[i - stride] - sq[i - stride - 1];
            }
        }
        Self { stride, sum, sq }
    }

    fn rect(table: &[i64], stride: usize, u: u32, v: u32, w: usize, h: usize) -> i64 {
        let (x0, y0) = (u as usize, v as usize);
        let (x1, y1) = (x0 + w, y0 + h);
        table[y1 * stride + x1] + table[y0 * stride + x0]
            - table[y0 * stride + x1]
            - table[y1 * stride + x0]
    }

    fn sum(&self, u: u32, v: u32, w: usize, h: usize) -> i64 {
        Self::rect(&self.sum, self.stride, u, v, w, h)
    }

    fn sq(&self, u: u32, v: u32, w: usize, h: usize) -> i64 {
        Self::rect(&self.sq, self.stride, u, v, w, h)
    }
}

/// Windows pulled out of one image, with the regions that yielded none.
#[derive(Debug, Clone)]
pub struct ExtractedSamples {
    pub windows: Vec<SampleWindow>,
    pub unsampled_regions: Vec<u8>,
}

/// Draw up to `per_region` windows per region. A placement qualifies for a
/// region when at least 80% of its footprint carries that region's label
/// (exact integer test `5 * covered >= 4 * size^2`). Qualifying placements
/// are visited in seeded shuffled order: a first pass accepts only windows
/// that do not overlap any previously accepted window, a second pass fills
/// remaining slots allowing overlap. The per-region order is derived from
/// the region label, so adding regions never disturbs earlier ones.
pub fn extract_samples(
    img: &GrayImage,
    template: &SegmentationTemplate,
    size: u32,
    per_region: usize,
    seed: u64,
    source_id: &str,
) -> Result<ExtractedSamples> {
    if template.width() != img.width() || template.height() != img.height() {
        return Err(Error::invalid(format!(
            "template is {}x{} but image is {}x{}",
            template.width(),
            template.height(),
            img.width(),
            img.height()
        )));
    }
    if size == 0 || size > img.width() || size > img.height() {
        return Err(Error::invalid(format!(
            "window size {size} does not fit a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    if per_region == 0 {
        return Err(Error::invalid("per_region must be at least 1"));
    }

    let (w, h, s) = (img.width() as usize, img.height() as usize, size as usize);
    let stride = w + 1;
    let needed = 4 * (s as u64) * (s as u64);
    let labels = template.labels();
    let mut table = vec![0u64; stride * (h + 1)];
    let mut windows = Vec::new();
    let mut unsampled = Vec::new();
    let mut chosen: Vec<(u32, u32)> = Vec::new();

    for region in 0..template.regions() {
        for y in 0..h {
            for x in 0..w {
                let ind = (labels[y * w + x] as usize == region) as u64;
                let i = (y + 1) * stride + x + 1;
                table[i] = ind + table[i - 1] + table[i - stride] - table[i - stride - 1];
            }
        }
        let mut qualifying: Vec<(u32, u32)> = Vec::new();
        for v in 0..=(h - s) {
            for u in 0..=(w - s) {
                let covered = table[(v + s) * stride + u + s] + table[v * stride + u]
                    - table[v * stride + u + s]
                    - table[(v + s) * stride + u];
                if 5 * covered >= needed {
                    qualifying.push((u as u32, v as u32));
                }
            }
        }
        if qualifying.is_empty() {
            unsampled.push(region as u8);
            continue;
        }
        let mut rng =
            seeding::rng_from_seed(seeding::derive_seed(seed, &[domain::SAMPLE, region as u64]));
        qualifying.shuffle(&mut rng);

        let mut taken = 0;
        for &(u, v) in &qualifying {
            if taken == per_region {
                break;
            }
            let clear = chosen
                .iter()
                .all(|&(cu, cv)| u.abs_diff(cu) >= size || v.abs_diff(cv) >= size);
            if clear {
                chosen.push((u, v));
                windows.push(SampleWindow::cut(img, u, v, size, source_id, region as u8)?);
                taken += 1;
            }
        }
        if taken < per_region {
            for &(u, v) in &qualifying {
                if taken == per_region {
                    break;
                }
                if !chosen.contains(&(u, v)) {
                    chosen.push((u, v));
                    windows.push(SampleWindow::cut(img, u, v, size, source_id, region as u8)?);
                    taken += 1;
                }
            }
        }
    }
    Ok(ExtractedSamples {
        windows,
        unsampled_regions: unsampled,
    })
}
