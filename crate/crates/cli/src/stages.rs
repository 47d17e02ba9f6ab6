//! Subcommand implementations. Every referenced input path is checked
//! before any stage starts, so a typo cannot leave half-written outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use speckle_core::seeding::domain;
use speckle_core::{
    derive_seed, detect_valleys, evaluate_split, extract_samples, feature_vector, fit_predict,
    histogram, kmeans_segment, load_corpus, load_gray, load_image, load_table, make_corpus,
    preset3, read_feature_csv, report_tables, run_grid, run_scopes, save_corpus, save_gray,
    save_reports, save_split, save_tables, split, standard_scopes, threshold_segment, ClassScope,
    Corpus, DatasetRow, Error, FeatureSet, GrayImage, GridSpec, KnnConfig, LabeledDataset, Metric,
    Result, SampleWindow, SegmentationMethod, SegmentationTemplate, ValleyReport,
};

use crate::{Command, MethodArg};

pub fn run(cmd: Command) -> Result<()> {
    for path in referenced_inputs(&cmd) {
        if !path.exists() {
            return Err(Error::InvalidParameter(format!(
                "missing input path: {}",
                path.display()
            )));
        }
    }
    match cmd {
        Command::Convert { input, output } => convert(&input, &output),
        Command::Histogram { input, csv } => histogram_csv(&input, &csv),
        Command::Segment {
            image,
            method,
            valleys,
            seed,
            out,
        } => segment(&image, method, valleys, seed, &out),
        Command::Sample {
            image,
            template,
            size,
            per_region,
            seed,
            class,
            out_dir,
        } => sample(&image, &template, size, per_region, seed, class, &out_dir),
        Command::Features {
            manifests,
            set,
            out,
        } => features(&manifests, set, &out),
        Command::Split {
            features,
            seed,
            out_dir,
        } => split_cmd(&features, seed, &out_dir),
        Command::Classify {
            train,
            train_class,
            test,
            test_class,
            k,
            metric,
            no_standardize,
            report,
        } => classify(
            &train,
            &train_class,
            &test,
            &test_class,
            k,
            metric,
            !no_standardize,
            &report,
        ),
        Command::Synth {
            classes,
            per_class,
            seed,
            width,
            height,
            out_dir,
        } => synth(&classes, per_class, seed, width, height, &out_dir),
        Command::Optimize {
            corpus,
            grid,
            out,
            tables,
            all_scopes,
        } => optimize(&corpus, &grid, &out, tables.as_deref(), all_scopes),
        Command::Reproduce {
            seed,
            out,
            per_class,
            sizes,
            ks,
        } => reproduce(seed, &out, per_class, sizes, ks),
    }
}

fn referenced_inputs(cmd: &Command) -> Vec<&Path> {
    match cmd {
        Command::Convert { input, .. } => vec![input],
        Command::Histogram { input, .. } => vec![input],
        Command::Segment { image, .. } => vec![image],
        Command::Sample {
            image, template, ..
        } => vec![image.as_path(), template.as_path()],
        Command::Features { manifests, .. } => manifests.iter().map(PathBuf::as_path).collect(),
        Command::Split { features, .. } => vec![features],
        Command::Classify {
            train,
            train_class,
            test,
            test_class,
            ..
        } => vec![
            train.as_path(),
            train_class.as_path(),
            test.as_path(),
            test_class.as_path(),
        ],
        Command::Optimize { corpus, grid, .. } => vec![corpus.as_path(), grid.as_path()],
        Command::Synth { .. } | Command::Reproduce { .. } => vec![],
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn convert(input: &Path, output: &Path) -> Result<()> {
    let gray = load_image(input)?.into_gray();
    ensure_parent(output)?;
    save_gray(&gray, output)
}

fn histogram_csv(input: &Path, out: &Path) -> Result<()> {
    let h = histogram(&load_gray(input)?);
    let mut text = String::from("intensity,count\n");
    for (intensity, &count) in h.bins().iter().enumerate() {
        text.push_str(&format!("{intensity},{count}\n"));
    }
    ensure_parent(out)?;
    std::fs::write(out, text)?;
    Ok(())
}

/// Keep the `want` deepest valleys (ties toward lower intensity), in
/// ascending intensity order.
fn choose_valleys(report: &ValleyReport, want: Option<usize>) -> Result<Vec<u8>> {
    let detected = report.valleys.clone();
    let Some(want) = want else {
        return Ok(detected);
    };
    if want > detected.len() {
        return Err(Error::InvalidParameter(format!(
            "detected {} valleys, cannot honor --valleys {want}",
            detected.len()
        )));
    }
    let mut by_depth = detected;
    by_depth.sort_by(|&a, &b| {
        report.smoothed_bins[a as usize]
            .total_cmp(&report.smoothed_bins[b as usize])
            .then(a.cmp(&b))
    });
    by_depth.truncate(want);
    by_depth.sort_unstable();
    Ok(by_depth)
}

#[derive(Serialize, Deserialize)]
struct TemplateSidecar {
    #[serde(rename = "K")]
    k: usize,
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    thresholds: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    centers: Option<Vec<f64>>,
}

fn write_template(template: &SegmentationTemplate, pgm_path: &Path) -> Result<()> {
    ensure_parent(pgm_path)?;
    save_gray(&template.to_gray(), pgm_path)?;
    let (thresholds, centers) = match template.method() {
        SegmentationMethod::Threshold { thresholds } => (Some(thresholds.clone()), None),
        SegmentationMethod::Kmeans { centers } => (None, Some(centers.clone())),
    };
    let sidecar = TemplateSidecar {
        k: template.regions(),
        method: template.method().name().to_string(),
        thresholds,
        centers,
    };
    write_json(&pgm_path.with_extension("json"), &sidecar)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}.pgm"))
}

fn segment(
    image: &Path,
    method: MethodArg,
    valleys: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let img = load_gray(image)?;
    let report = detect_valleys(&histogram(&img), 9, 0.05)?;
    let chosen = choose_valleys(&report, valleys)?;
    let k = chosen.len() + 1;
    match method {
        MethodArg::Threshold => write_template(&threshold_segment(&img, &chosen)?, out),
        MethodArg::Kmeans => write_template(&kmeans_segment(&img, k, 3, seed)?, out),
        MethodArg::Both => {
            write_template(
                &threshold_segment(&img, &chosen)?,
                &with_suffix(out, "_threshold"),
            )?;
            write_template(
                &kmeans_segment(&img, k, 3, seed)?,
                &with_suffix(out, "_kmeans"),
            )
        }
    }
}

/// Invert the template PGM's label scaling using K from the sidecar. The
/// forward map is floor(label * 255 / span), so ceil division restores
/// every label exactly.
fn rebuild_template(gray: &GrayImage, sidecar: &TemplateSidecar) -> Result<SegmentationTemplate> {
    if sidecar.k == 0 {
        return Err(Error::InvalidParameter(
            "sidecar K must be at least 1".into(),
        ));
    }
    let span = (sidecar.k.max(2) - 1) as u32;
    let labels = gray
        .data()
        .iter()
        .map(|&g| ((g as u32 * span).div_ceil(255)) as u8)
        .collect();
    let method = match (&sidecar.thresholds, &sidecar.centers) {
        (Some(t), None) => SegmentationMethod::Threshold {
            thresholds: t.clone(),
        },
        (None, Some(c)) => SegmentationMethod::Kmeans { centers: c.clone() },
        _ => {
            return Err(Error::InvalidParameter(
                "sidecar must carry exactly one of thresholds or centers".into(),
            ))
        }
    };
    SegmentationTemplate::from_labels(gray.width(), gray.height(), labels, sidecar.k, method)
}

#[derive(Serialize, Deserialize)]
struct WindowEntry {
    file: String,
    origin: (u32, u32),
    size: u32,
    region_label: u8,
    source_id: String,
}

#[derive(Serialize, Deserialize)]
struct SampleManifest {
    source_id: String,
    size: u32,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<u8>,
    windows: Vec<WindowEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    unsampled_regions: Vec<u8>,
}

fn write_windows(
    windows: &[SampleWindow],
    unsampled_regions: Vec<u8>,
    size: u32,
    seed: u64,
    class: Option<u8>,
    source_id: &str,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        let file = format!("window_{i:03}.pgm");
        save_gray(w.pixels(), out_dir.join(&file))?;
        entries.push(WindowEntry {
            file,
            origin: w.origin(),
            size,
            region_label: w.region_label(),
            source_id: w.source_id().to_string(),
        });
    }
    let manifest = SampleManifest {
        source_id: source_id.to_string(),
        size,
        seed,
        class,
        windows: entries,
        unsampled_regions,
    };
    write_json(&out_dir.join("samples.json"), &manifest)
}

#[allow(clippy::too_many_arguments)]
fn sample(
    image: &Path,
    template_path: &Path,
    size: u32,
    per_region: usize,
    seed: u64,
    class: Option<u8>,
    out_dir: &Path,
) -> Result<()> {
    let img = load_gray(image)?;
    let sidecar: TemplateSidecar = read_json(&template_path.with_extension("json"))?;
    let template = rebuild_template(&load_gray(template_path)?, &sidecar)?;
    let source_id = image
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let extracted = extract_samples(&img, &template, size, per_region, seed, &source_id)?;
    write_windows(
        &extracted.windows,
        extracted.unsampled_regions,
        size,
        seed,
        class,
        &source_id,
        out_dir,
    )
}

fn features(manifests: &[PathBuf], set: FeatureSet, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    let mut all_have_class = true;
    for manifest_path in manifests {
        let manifest: SampleManifest = read_json(manifest_path)?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        if manifest.class.is_none() {
            all_have_class = false;
        }
        for entry in &manifest.windows {
            let window_img = load_gray(dir.join(&entry.file))?;
            let w = SampleWindow::cut(
                &window_img,
                0,
                0,
                entry.size,
                &entry.source_id,
                entry.region_label,
            )?;
            let (x, y) = entry.origin;
            rows.push(DatasetRow {
                sample_id: format!("{}@{x},{y}", entry.source_id),
                source_id: entry.source_id.clone(),
                region_label: entry.region_label,
                class: manifest.class.unwrap_or(1),
                features: feature_vector(&w, set)?,
            });
        }
    }
    let ds = LabeledDataset::new(set, rows)?;
    ensure_parent(out)?;
    speckle_core::write_feature_csv(&ds, out, all_have_class)
}

fn split_cmd(features: &Path, seed: u64, out_dir: &Path) -> Result<()> {
    let ds = read_feature_csv(features)?;
    save_split(&split(&ds, seed)?, out_dir)
}

#[allow(clippy::too_many_arguments)]
fn classify(
    train: &Path,
    train_class: &Path,
    test: &Path,
    test_class: &Path,
    k: usize,
    metric: Metric,
    standardize: bool,
    report: &Path,
) -> Result<()> {
    let train = load_table(train, train_class)?;
    let test = load_table(test, test_class)?;
    let cfg = KnnConfig {
        k,
        metric,
        standardize,
    };
    write_json(report, &fit_predict(&train, &test, &cfg)?)
}

fn synth(
    classes: &str,
    per_class: usize,
    seed: u64,
    width: u32,
    height: u32,
    out_dir: &Path,
) -> Result<()> {
    if classes != "preset3" {
        return Err(Error::InvalidParameter(format!(
            "--classes accepts only \"preset3\", got {classes:?}"
        )));
    }
    let corpus = make_corpus(&preset3(width, height), per_class, seed)?;
    save_corpus(&corpus, out_dir)
}

#[derive(Serialize)]
struct RunMeta {
    wall_time_seconds: f64,
    workers: usize,
    unix_time_seconds: u64,
}

fn write_run_meta(path: &Path, started: Instant) -> Result<()> {
    write_json(
        path,
        &RunMeta {
            wall_time_seconds: started.elapsed().as_secs_f64(),
            workers: rayon::current_num_threads(),
            unix_time_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    )
}

fn optimize(
    corpus_dir: &Path,
    grid: &Path,
    out: &Path,
    tables: Option<&Path>,
    all_scopes: bool,
) -> Result<()> {
    let started = Instant::now();
    let corpus = load_corpus(corpus_dir)?;
    let spec: GridSpec = read_json(grid)?;
    let reports = if all_scopes {
        run_scopes(&corpus, &spec, &standard_scopes())?
    } else {
        vec![run_grid(&corpus, &spec)?]
    };
    ensure_parent(out)?;
    save_reports(&reports, out)?;
    if let Some(dir) = tables {
        save_tables(&report_tables(&reports)?, dir)?;
    }
    write_run_meta(&out.with_file_name("run_meta.json"), started)
}

fn reproduce(
    seed: u64,
    out: &Path,
    per_class: usize,
    sizes: Option<Vec<u32>>,
    ks: Option<Vec<usize>>,
) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;

    let corpus = make_corpus(&preset3(192, 192), per_class, seed)?;
    save_corpus(&corpus, out.join("corpus"))?;

    let template_dir = out.join("templates");
    std::fs::create_dir_all(&template_dir)?;
    let sample_dir = out.join("samples");
    let mut rows = Vec::new();
    for (class, pilot) in pilots(&corpus) {
        let report = detect_valleys(&histogram(&pilot.image), 9, 0.05)?;
        let threshold = threshold_segment(&pilot.image, &report.valleys)?;
        write_template(
            &threshold,
            &template_dir.join(format!("class{class}_threshold.pgm")),
        )?;
        let kmeans = kmeans_segment(
            &pilot.image,
            report.valleys.len() + 1,
            3,
            derive_seed(seed, &[domain::KMEANS, class as u64]),
        )?;
        write_template(
            &kmeans,
            &template_dir.join(format!("class{class}_kmeans.pgm")),
        )?;

        let sample_seed = derive_seed(seed, &[domain::SAMPLE, 60, class as u64]);
        let extracted = extract_samples(&pilot.image, &threshold, 60, 4, sample_seed, &pilot.id)?;
        write_windows(
            &extracted.windows,
            extracted.unsampled_regions.clone(),
            60,
            sample_seed,
            Some(class),
            &pilot.id,
            &sample_dir.join(format!("class{class}")),
        )?;
        for w in &extracted.windows {
            let (x, y) = w.origin();
            rows.push(DatasetRow {
                sample_id: format!("{}@{x},{y}", pilot.id),
                source_id: pilot.id.clone(),
                region_label: w.region_label(),
                class,
                features: feature_vector(w, FeatureSet::Seventeen)?,
            });
        }
    }

    let ds = LabeledDataset::new(FeatureSet::Seventeen, rows)?;
    speckle_core::write_feature_csv(&ds, out.join("features.csv"), true)?;
    let sp = split(&ds, seed)?;
    save_split(&sp, out.join("split"))?;
    let cfg = KnnConfig {
        k: 1,
        metric: Metric::Euclidean,
        standardize: true,
    };
    write_json(&out.join("classify.json"), &evaluate_split(&sp, &cfg)?)?;

    let grid = GridSpec {
        sample_sizes: sizes.unwrap_or_else(|| vec![30, 60, 90, 120]),
        feature_sets: vec![FeatureSet::Eleven, FeatureSet::Seventeen],
        ks: ks.unwrap_or_else(|| vec![1, 3, 5]),
        metrics: Metric::ALL.to_vec(),
        class_scope: ClassScope::AllThree,
        runs: 3,
        samples_per_region: 4,
        base_seed: seed,
    };
    let reports = run_scopes(&corpus, &grid, &standard_scopes())?;
    save_reports(&reports, out.join("report.json"))?;
    save_tables(&report_tables(&reports)?, out.join("tables"))?;
    write_run_meta(&out.join("run_meta.json"), started)
}

fn pilots(corpus: &Corpus) -> BTreeMap<u8, &speckle_core::CorpusImage> {
    let mut map = BTreeMap::new();
    for img in &corpus.images {
        map.entry(img.class).or_insert(img);
    }
    map
}
