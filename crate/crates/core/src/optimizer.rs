//! Grid search over sample size, feature set, and classifier parameters.
//!
//! Phase one is shared by every configuration at a given sample size: the
//! first image of each class acts as the pilot, its histogram valleys give
//! a threshold template (a valley-free histogram collapses to one region),
//! windows are drawn from the pilot and located in the remaining images of
//! the class by normalized cross-correlation, and each window becomes one
//! seventeen-feature row (the eleven-feature table is its prefix). Phase
//! two evaluates every configuration on seeded splits plus their swaps;
//! all seeds derive from the base seed and the full configuration tuple,
//! so results are identical for any worker count.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, enforce_minimum, DatasetRow, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::{feature_vector, FeatureSet};
use crate::knn::{evaluate_split, EvalResult, KnnConfig, Metric};
use crate::raster::{histogram, GrayImage};
use crate::sampling::{best_match_fast, extract_samples, MatchMetric, SampleWindow};
use crate::seeding::{derive_seed, domain};
use crate::segment::{detect_valleys, threshold_segment, SegmentationTemplate};
use crate::synth::Corpus;

pub const ALLOWED_SAMPLE_SIZES: [u32; 4] = [30, 60, 90, 120];

/// Column order used by the reporting tables.
pub const TABLE_SIZE_ORDER: [u32; 4] = [120, 90, 60, 30];

const PILOT_SMOOTHING_WINDOW: usize = 9;
const PILOT_MIN_PROMINENCE: f64 = 0.05;

/// Which classes a grid run classifies between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassScope {
    AllThree,
    Pairwise(u8, u8),
}

impl ClassScope {
    pub fn classes(self) -> Vec<u8> {
        match self {
            ClassScope::AllThree => vec![1, 2, 3],
            ClassScope::Pairwise(a, b) => vec![a, b],
        }
    }

    pub fn tag(self) -> String {
        match self {
            ClassScope::AllThree => "all_three".to_string(),
            ClassScope::Pairwise(a, b) => format!("pair_{a}_{b}"),
        }
    }

    fn seed_tag(self) -> u64 {
        match self {
            ClassScope::AllThree => 0,
            ClassScope::Pairwise(a, b) => ((a as u64) << 8) | b as u64,
        }
    }
}

/// The standard reporting order: the three pairs, then all three classes.
pub fn standard_scopes() -> [ClassScope; 4] {
    [
        ClassScope::Pairwise(1, 2),
        ClassScope::Pairwise(1, 3),
        ClassScope::Pairwise(2, 3),
        ClassScope::AllThree,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sample_sizes: Vec<u32>,
    pub feature_sets: Vec<FeatureSet>,
    pub ks: Vec<usize>,
    pub metrics: Vec<Metric>,
    pub class_scope: ClassScope,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_samples_per_region")]
    pub samples_per_region: usize,
    pub base_seed: u64,
}

fn default_runs() -> usize {
    3
}

fn default_samples_per_region() -> usize {
    4
}

impl GridSpec {
    /// Reject empty or out-of-range dimensions and return a normalized
    /// copy: dimensions sorted ascending with duplicates removed, metrics
    /// in their canonical order, pairwise classes ordered low to high.
    pub fn validated(&self) -> Result<GridSpec> {
        let mut spec = self.clone();
        for (name, empty) in [
            ("sample_sizes", spec.sample_sizes.is_empty()),
            ("feature_sets", spec.feature_sets.is_empty()),
            ("ks", spec.ks.is_empty()),
            ("metrics", spec.metrics.is_empty()),
        ] {
            if empty {
                return Err(Error::invalid(format!("{name} must be non-empty")));
            }
        }
        if let Some(&bad) = spec
            .sample_sizes
            .iter()
            .find(|s| !ALLOWED_SAMPLE_SIZES.contains(s))
        {
            return Err(Error::invalid(format!(
                "sample size {bad} is not one of {ALLOWED_SAMPLE_SIZES:?}"
            )));
        }
        if spec.ks.contains(&0) {
            return Err(Error::invalid("k must be at least 1"));
        }
        if spec.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if spec.samples_per_region == 0 {
            return Err(Error::invalid("samples_per_region must be at least 1"));
        }
        if let ClassScope::Pairwise(a, b) = spec.class_scope {
            if a == b || !(1..=3).contains(&a) || !(1..=3).contains(&b) {
                return Err(Error::invalid(format!(
                    "pairwise scope needs two distinct classes in 1..=3, got ({a}, {b})"
                )));
            }
            if a > b {
                spec.class_scope = ClassScope::Pairwise(b, a);
            }
        }
        spec.sample_sizes.sort_unstable();
        spec.sample_sizes.dedup();
        spec.feature_sets.sort_by_key(|f| f.len());
        spec.feature_sets.dedup();
        spec.ks.sort_unstable();
        spec.ks.dedup();
        let chosen: Vec<Metric> = Metric::ALL
            .into_iter()
            .filter(|m| spec.metrics.contains(m))
            .collect();
        spec.metrics = chosen;
        Ok(spec)
    }
}

/// One point of the grid, ordered by (size, feature set, k, metric).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub sample_size: u32,
    pub feature_set: FeatureSet,
    pub k: usize,
    pub metric: Metric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config: GridConfig,
    pub mean_accuracy: f64,
    pub max_accuracy: f64,
    pub evals: Vec<EvalResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedConfig {
    pub config: GridConfig,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PilotImage {
    pub class: u8,
    pub image_id: String,
}

/// Everything a grid run produced. `configs` is in configuration order and
/// `best_config` has the highest mean accuracy (ties fall to max accuracy,
/// then to configuration order). Wall time is kept out of serialization so
/// saved reports depend only on inputs and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub scope: ClassScope,
    pub grid: GridSpec,
    pub pilot_images: Vec<PilotImage>,
    pub warnings: Vec<String>,
    pub configs: Vec<ConfigResult>,
    pub skipped: Vec<SkippedConfig>,
    pub best_config: GridConfig,
    pub best_mean_accuracy: f64,
    #[serde(skip, default)]
    pub wall_time_seconds: f64,
}

struct SizeRows {
    seventeen: Vec<DatasetRow>,
    eleven: Vec<DatasetRow>,
}

type Phase1 = BTreeMap<u32, std::result::Result<SizeRows, String>>;

fn pilot_indices(corpus: &Corpus) -> BTreeMap<u8, usize> {
    let mut pilots = BTreeMap::new();
    for (i, img) in corpus.images.iter().enumerate() {
        pilots.entry(img.class).or_insert(i);
    }
    pilots
}

fn pilot_template(img: &GrayImage) -> Result<SegmentationTemplate> {
    let report = detect_valleys(
        &histogram(img),
        PILOT_SMOOTHING_WINDOW,
        PILOT_MIN_PROMINENCE,
    )?;
    threshold_segment(img, &report.valleys)
}

fn row_from_window(w: &SampleWindow, sample_id: String, class: u8) -> Result<DatasetRow> {
    Ok(DatasetRow {
        sample_id,
        source_id: w.source_id().to_string(),
        region_label: w.region_label(),
        class,
        features: feature_vector(w, FeatureSet::Seventeen)?,
    })
}

/// Pilot extraction plus cross-correlation placement for one sample size,
/// over every class in the corpus. Row order: classes ascending, pilot
/// windows first, then target images in corpus order.
fn rows_for_size(
    corpus: &Corpus,
    pilots: &BTreeMap<u8, usize>,
    size: u32,
    per_region: usize,
    base_seed: u64,
) -> Result<Vec<DatasetRow>> {
    let mut rows = Vec::new();
    for (&class, &pilot_idx) in pilots {
        let pilot = &corpus.images[pilot_idx];
        let template = pilot_template(&pilot.image)?;
        let extracted = extract_samples(
            &pilot.image,
            &template,
            size,
            per_region,
            derive_seed(base_seed, &[domain::SAMPLE, size as u64, class as u64]),
            &pilot.id,
        )?;
        if extracted.windows.is_empty() {
            return Err(Error::invalid(format!(
                "no samples extracted from pilot {} at size {size}",
                pilot.id
            )));
        }
        for w in &extracted.windows {
            let (x, y) = w.origin();
            rows.push(row_from_window(
                w,
                format!("{}:p@{x},{y}", pilot.id),
                class,
            )?);
        }
        let targets: Vec<&crate::synth::CorpusImage> = corpus
            .images
            .iter()
            .enumerate()
            .filter(|&(i, img)| img.class == class && i != pilot_idx)
            .map(|(_, img)| img)
            .collect();
        let matched: Vec<Vec<DatasetRow>> = targets
            .par_iter()
            .map(|target| {
                extracted
                    .windows
                    .iter()
                    .enumerate()
                    .map(|(i, w)| {
                        let hit = best_match_fast(&target.image, w, MatchMetric::Ncc)?;
                        let (u, v) = hit.position;
                        let placed = SampleWindow::cut(
                            &target.image,
                            u,
                            v,
                            size,
                            &target.id,
                            w.region_label(),
                        )?;
                        row_from_window(&placed, format!("{}:m{i}@{u},{v}", target.id), class)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        rows.extend(matched.into_iter().flatten());
    }
    Ok(rows)
}

fn build_phase1(corpus: &Corpus, spec: &GridSpec) -> Phase1 {
    let pilots = pilot_indices(corpus);
    spec.sample_sizes
        .par_iter()
        .map(|&size| {
            let built = rows_for_size(
                corpus,
                &pilots,
                size,
                spec.samples_per_region,
                spec.base_seed,
            )
            .map(|seventeen| {
                let eleven = seventeen
                    .iter()
                    .map(|r| DatasetRow {
                        features: r.features.truncate_to_eleven(),
                        ..r.clone()
                    })
                    .collect();
                SizeRows { seventeen, eleven }
            })
            .map_err(|e| e.to_string());
            (size, built)
        })
        .collect()
}

fn config_list(spec: &GridSpec) -> Vec<GridConfig> {
    let mut configs = Vec::new();
    for &sample_size in &spec.sample_sizes {
        for &feature_set in &spec.feature_sets {
            for &k in &spec.ks {
                for &metric in &spec.metrics {
                    configs.push(GridConfig {
                        sample_size,
                        feature_set,
                        k,
                        metric,
                    });
                }
            }
        }
    }
    configs
}

fn evaluate_config(
    cfg: GridConfig,
    rows: &SizeRows,
    spec: &GridSpec,
    pairs_per_run: usize,
) -> Result<ConfigResult> {
    let source = match cfg.feature_set {
        FeatureSet::Eleven => &rows.eleven,
        FeatureSet::Seventeen => &rows.seventeen,
    };
    let scope_classes = spec.class_scope.classes();
    let scoped: Vec<DatasetRow> = source
        .iter()
        .filter(|r| scope_classes.contains(&r.class))
        .cloned()
        .collect();
    let ds = LabeledDataset::new(cfg.feature_set, scoped)?;
    let knn_cfg = KnnConfig {
        k: cfg.k,
        metric: cfg.metric,
        standardize: true,
    };
    let metric_idx = Metric::ALL.iter().position(|&m| m == cfg.metric).unwrap() as u64;
    let mut evals = Vec::with_capacity(spec.runs * pairs_per_run * 2);
    for run in 0..spec.runs {
        for pair in 0..pairs_per_run {
            let seed = derive_seed(
                spec.base_seed,
                &[
                    domain::EVAL,
                    spec.class_scope.seed_tag(),
                    cfg.sample_size as u64,
                    cfg.feature_set.len() as u64,
                    cfg.k as u64,
                    metric_idx,
                    run as u64,
                    pair as u64,
                ],
            );
            let sp = dataset::split(&ds, seed)?;
            evals.extend(evaluate_split(&sp, &knn_cfg)?);
        }
    }
    let mean_accuracy = evals.iter().map(|e| e.accuracy).sum::<f64>() / evals.len() as f64;
    let max_accuracy = evals.iter().map(|e| e.accuracy).fold(0.0, f64::max);
    Ok(ConfigResult {
        config: cfg,
        mean_accuracy,
        max_accuracy,
        evals,
    })
}

fn select_best(configs: &[ConfigResult]) -> Option<GridConfig> {
    let mut best: Option<&ConfigResult> = None;
    for c in configs {
        let wins = match best {
            None => true,
            Some(b) => {
                c.mean_accuracy > b.mean_accuracy
                    || (c.mean_accuracy == b.mean_accuracy && c.max_accuracy > b.max_accuracy)
            }
        };
        if wins {
            best = Some(c);
        }
    }
    best.map(|c| c.config)
}

fn grid_eval(corpus: &Corpus, spec: &GridSpec, phase1: &Phase1) -> Result<OptimizationReport> {
    let scope_classes = spec.class_scope.classes();
    let image_classes: Vec<u8> = corpus.images.iter().map(|img| img.class).collect();
    let warnings = enforce_minimum(&image_classes, &scope_classes)?;
    let in_scope_images = image_classes
        .iter()
        .filter(|c| scope_classes.contains(c))
        .count();
    let pairs_per_run = 1 + in_scope_images.saturating_sub(8);

    let outcomes: Vec<std::result::Result<ConfigResult, SkippedConfig>> = config_list(spec)
        .into_par_iter()
        .map(|cfg| match &phase1[&cfg.sample_size] {
            Ok(rows) => {
                evaluate_config(cfg, rows, spec, pairs_per_run).map_err(|e| SkippedConfig {
                    config: cfg,
                    reason: e.to_string(),
                })
            }
            Err(reason) => Err(SkippedConfig {
                config: cfg,
                reason: reason.clone(),
            }),
        })
        .collect();
    let mut configs = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(c) => configs.push(c),
            Err(s) => skipped.push(s),
        }
    }
    let best_config = select_best(&configs).ok_or_else(|| {
        Error::invalid(format!(
            "every configuration failed; first reason: {}",
            skipped.first().map_or("none", |s| s.reason.as_str())
        ))
    })?;
    let best_mean_accuracy = configs
        .iter()
        .find(|c| c.config == best_config)
        .map(|c| c.mean_accuracy)
        .unwrap();
    assert!(
        configs
            .iter()
            .all(|c| best_mean_accuracy >= c.mean_accuracy),
        "best configuration is not maximal"
    );
    let pilots = pilot_indices(corpus);
    Ok(OptimizationReport {
        scope: spec.class_scope,
        grid: spec.clone(),
        pilot_images: pilots
            .iter()
            .filter(|(class, _)| scope_classes.contains(class))
            .map(|(&class, &i)| PilotImage {
                class,
                image_id: corpus.images[i].id.clone(),
            })
            .collect(),
        warnings,
        configs,
        skipped,
        best_config,
        best_mean_accuracy,
        wall_time_seconds: 0.0,
    })
}

/// Sweep the whole grid for the scope named in `spec`.
pub fn run_grid(corpus: &Corpus, spec: &GridSpec) -> Result<OptimizationReport> {
    let start = Instant::now();
    let spec = spec.validated()?;
    let phase1 = build_phase1(corpus, &spec);
    let mut report = grid_eval(corpus, &spec, &phase1)?;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Sweep the grid once per scope, reusing the extracted feature rows:
/// pilot sampling and template matching depend only on the sample size,
/// so they run once regardless of how many scopes are requested.
pub fn run_scopes(
    corpus: &Corpus,
    spec: &GridSpec,
    scopes: &[ClassScope],
) -> Result<Vec<OptimizationReport>> {
    if scopes.is_empty() {
        return Err(Error::invalid("at least one scope is required"));
    }
    let start = Instant::now();
    let spec = spec.validated()?;
    let phase1 = build_phase1(corpus, &spec);
    let mut reports = Vec::with_capacity(scopes.len());
    for &scope in scopes {
        let scoped_spec = GridSpec {
            class_scope: scope,
            ..spec.clone()
        }
        .validated()?;
        let mut report = grid_eval(corpus, &scoped_spec, &phase1)?;
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScopeSizeRow {
    pub scope: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScopeFsetSizeRow {
    pub scope: String,
    pub feature_set: FeatureSet,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FsetComparison {
    pub scope: String,
    pub sample_size: u32,
    pub seventeen: f64,
    pub eleven: f64,
    pub holds: bool,
}

/// The three figure tables plus the seventeen-versus-eleven comparison.
/// Columns follow [`TABLE_SIZE_ORDER`]; a `None` cell means every
/// configuration at that size was skipped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tables {
    pub sizes: Vec<u32>,
    /// Best mean accuracy over all configurations, by scope and size.
    pub accuracy_by_size: Vec<ScopeSizeRow>,
    /// Mean accuracy averaged over (k, metric), by scope, feature set, size.
    pub mean_accuracy_by_feature_set: Vec<ScopeFsetSizeRow>,
    /// Max accuracy over (k, metric), by scope, feature set, size.
    pub max_accuracy_by_feature_set: Vec<ScopeFsetSizeRow>,
    pub seventeen_ge_eleven: Vec<FsetComparison>,
    pub violations: Vec<String>,
}

fn best_mean_at(report: &OptimizationReport, size: u32) -> Option<f64> {
    report
        .configs
        .iter()
        .filter(|c| c.config.sample_size == size)
        .map(|c| c.mean_accuracy)
        .reduce(f64::max)
}

fn fset_cell(
    report: &OptimizationReport,
    size: u32,
    fset: FeatureSet,
    pick: impl Fn(&ConfigResult) -> f64,
    combine: impl Fn(&[f64]) -> f64,
) -> Option<f64> {
    let values: Vec<f64> = report
        .configs
        .iter()
        .filter(|c| c.config.sample_size == size && c.config.feature_set == fset)
        .map(pick)
        .collect();
    if values.is_empty() {
        None
    } else {
        Some(combine(&values))
    }
}

/// Collapse one report per scope into the figure tables.
pub fn report_tables(reports: &[OptimizationReport]) -> Result<Tables> {
    if reports.is_empty() {
        return Err(Error::invalid("at least one report is required"));
    }
    let sizes: Vec<u32> = TABLE_SIZE_ORDER
        .into_iter()
        .filter(|s| reports.iter().any(|r| r.grid.sample_sizes.contains(s)))
        .collect();
    let mean = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;
    let max = |vals: &[f64]| vals.iter().copied().fold(f64::NAN, f64::max);

    let mut accuracy_by_size = Vec::new();
    let mut mean_by_fset = Vec::new();
    let mut max_by_fset = Vec::new();
    let mut comparisons = Vec::new();
    let mut violations = Vec::new();
    for report in reports {
        let tag = report.scope.tag();
        accuracy_by_size.push(ScopeSizeRow {
            scope: tag.clone(),
            values: sizes.iter().map(|&s| best_mean_at(report, s)).collect(),
        });
        for &fset in &report.grid.feature_sets {
            mean_by_fset.push(ScopeFsetSizeRow {
                scope: tag.clone(),
                feature_set: fset,
                values: sizes
                    .iter()
                    .map(|&s| fset_cell(report, s, fset, |c| c.mean_accuracy, mean))
                    .collect(),
            });
            max_by_fset.push(ScopeFsetSizeRow {
                scope: tag.clone(),
                feature_set: fset,
                values: sizes
                    .iter()
                    .map(|&s| fset_cell(report, s, fset, |c| c.max_accuracy, max))
                    .collect(),
            });
        }
        if report.grid.feature_sets.contains(&FeatureSet::Eleven)
            && report.grid.feature_sets.contains(&FeatureSet::Seventeen)
        {
            for &size in &sizes {
                if !report.grid.sample_sizes.contains(&size) {
                    continue;
                }
                let pick_best = |fset| {
                    fset_cell(
                        report,
                        size,
                        fset,
                        |c| c.mean_accuracy,
                        |v| v.iter().copied().fold(f64::NAN, f64::max),
                    )
                };
                if let (Some(seventeen), Some(eleven)) = (
                    pick_best(FeatureSet::Seventeen),
                    pick_best(FeatureSet::Eleven),
                ) {
                    let holds = seventeen >= eleven;
                    if !holds {
                        violations.push(format!(
                            "scope {tag} size {size}: seventeen {seventeen:.4} < eleven {eleven:.4}"
                        ));
                    }
                    comparisons.push(FsetComparison {
                        scope: tag.clone(),
                        sample_size: size,
                        seventeen,
                        eleven,
                        holds,
                    });
                }
            }
        }
    }
    Ok(Tables {
        sizes,
        accuracy_by_size,
        mean_accuracy_by_feature_set: mean_by_fset,
        max_accuracy_by_feature_set: max_by_fset,
        seventeen_ge_eleven: comparisons,
        violations,
    })
}

fn size_headers(sizes: &[u32]) -> Vec<String> {
    sizes.iter().map(|s| format!("size_{s}")).collect()
}

fn cell_text(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// Write the tables as three CSV files plus a full-precision JSON copy.
pub fn save_tables(tables: &Tables, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("accuracy_by_size.csv"))?;
    let mut header = vec!["scope".to_string()];
    header.extend(size_headers(&tables.sizes));
    w.write_record(&header)?;
    for row in &tables.accuracy_by_size {
        let mut record = vec![row.scope.clone()];
        record.extend(row.values.iter().map(|&v| cell_text(v)));
        w.write_record(&record)?;
    }
    w.flush()?;
    for (name, rows) in [
        (
            "mean_accuracy_by_feature_set.csv",
            &tables.mean_accuracy_by_feature_set,
        ),
        (
            "max_accuracy_by_feature_set.csv",
            &tables.max_accuracy_by_feature_set,
        ),
    ] {
        let mut w = csv::Writer::from_path(dir.join(name))?;
        let mut header = vec!["scope".to_string(), "feature_set".to_string()];
        header.extend(size_headers(&tables.sizes));
        w.write_record(&header)?;
        for row in rows {
            let mut record = vec![
                row.scope.clone(),
                match row.feature_set {
                    FeatureSet::Eleven => "eleven".to_string(),
                    FeatureSet::Seventeen => "seventeen".to_string(),
                },
            ];
            record.extend(row.values.iter().map(|&v| cell_text(v)));
            w.write_record(&record)?;
        }
        w.flush()?;
    }
    let json = serde_json::to_string_pretty(tables)?;
    std::fs::write(dir.join("tables.json"), json + "\n")?;
    Ok(())
}

/// Write one or more scope reports as a single JSON document.
pub fn save_reports(reports: &[OptimizationReport], path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(reports)?;
    std::fs::write(path.as_ref(), json + "\n")?;
    Ok(())
}

pub fn load_reports(path: impl AsRef<Path>) -> Result<Vec<OptimizationReport>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::UnreadableFile {
        path: path.as_ref().to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}
