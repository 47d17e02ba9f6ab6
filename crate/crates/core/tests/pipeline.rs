//! End-to-end runs over small constructed inputs: bimodal images through
//! segmentation, sampling, features, and classification; and the optimizer
//! fed from disk versus memory.

use rand::Rng;
use speckle_core::{
    detect_valleys, extract_samples, feature_vector, fit_predict, histogram, load_corpus,
    load_split, make_corpus, run_grid, save_corpus, save_split, split, threshold_segment,
    ClassScope, DatasetRow, FeatureSet, GrayImage, GridSpec, KnnConfig, LabeledDataset, Metric,
    SpeckleParams,
};

/// Two tonal plateaus with seeded noise: left half dark, right half bright.
fn two_tone(dark: u8, bright: u8, seed: u64) -> GrayImage {
    let mut rng = speckle_core::rng_from_seed(seed);
    GrayImage::from_fn(96, 96, |x, _| {
        let base = if x < 48 { dark } else { bright };
        let jitter: i16 = rng.gen_range(-15..=15);
        (base as i16 + jitter).clamp(0, 255) as u8
    })
}

fn rows_from_image(img: &GrayImage, id: &str, class: u8, seed: u64) -> Vec<DatasetRow> {
    let report = detect_valleys(&histogram(img), 9, 0.05).unwrap();
    assert!(
        !report.valleys.is_empty(),
        "bimodal histogram should have a valley"
    );
    let template = threshold_segment(img, &report.valleys).unwrap();
    assert!(template.regions() >= 2);
    let extracted = extract_samples(img, &template, 30, 2, seed, id).unwrap();
    assert!(!extracted.windows.is_empty());
    extracted
        .windows
        .iter()
        .map(|w| {
            let (x, y) = w.origin();
            DatasetRow {
                sample_id: format!("{id}@{x},{y}"),
                source_id: id.to_string(),
                region_label: w.region_label(),
                class,
                features: feature_vector(w, FeatureSet::Seventeen).unwrap(),
            }
        })
        .collect()
}

#[test]
fn bimodal_images_classify_through_the_whole_chain() {
    let mut rows = Vec::new();
    for i in 0..4u64 {
        let a = two_tone(50, 190, 100 + i);
        let b = two_tone(70, 170, 200 + i);
        rows.extend(rows_from_image(&a, &format!("a{i}"), 1, 300 + i));
        rows.extend(rows_from_image(&b, &format!("b{i}"), 2, 400 + i));
    }
    let ds = LabeledDataset::new(FeatureSet::Seventeen, rows).unwrap();
    let sp = split(&ds, 5).unwrap();
    let cfg = KnnConfig {
        k: 1,
        metric: Metric::Euclidean,
        standardize: true,
    };
    let result = fit_predict(&sp.train, &sp.test, &cfg).unwrap();
    assert!(
        result.accuracy >= 0.9,
        "accuracy {} on separable two-tone classes",
        result.accuracy
    );
    let mass: usize = result.confusion.iter().flatten().sum();
    assert_eq!(mass, sp.test.len());
}

#[test]
fn split_written_to_disk_classifies_identically() {
    let mut rows = Vec::new();
    for i in 0..3u64 {
        let a = two_tone(40, 200, 500 + i);
        let b = two_tone(90, 150, 600 + i);
        rows.extend(rows_from_image(&a, &format!("a{i}"), 1, 700 + i));
        rows.extend(rows_from_image(&b, &format!("b{i}"), 2, 800 + i));
    }
    let ds = LabeledDataset::new(FeatureSet::Seventeen, rows).unwrap();
    let sp = split(&ds, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_split(&sp, dir.path()).unwrap();
    let (train, test) = load_split(dir.path()).unwrap();
    let cfg = KnnConfig {
        k: 3,
        metric: Metric::Manhattan,
        standardize: true,
    };
    let from_memory = fit_predict(&sp.train, &sp.test, &cfg).unwrap();
    let from_disk = fit_predict(&train, &test, &cfg).unwrap();
    assert_eq!(from_memory.predictions, from_disk.predictions);
    assert_eq!(from_memory.accuracy.to_bits(), from_disk.accuracy.to_bits());
}

#[test]
fn optimizing_a_reloaded_corpus_matches_memory() {
    let classes: Vec<SpeckleParams> = [(0.85, 0.0), (0.45, 2.0), (0.15, 3.0)]
        .into_iter()
        .map(|(w, g)| SpeckleParams {
            width: 96,
            height: 96,
            target_contrast: w,
            grain_radius: g,
            mean_level: 70.0,
            seed: 0,
        })
        .collect();
    let corpus = make_corpus(&classes, 4, 31).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&corpus, dir.path()).unwrap();
    let reloaded = load_corpus(dir.path()).unwrap();
    let spec = GridSpec {
        sample_sizes: vec![30],
        feature_sets: vec![FeatureSet::Eleven, FeatureSet::Seventeen],
        ks: vec![1],
        metrics: vec![Metric::Chebyshev],
        class_scope: ClassScope::Pairwise(1, 3),
        runs: 1,
        samples_per_region: 2,
        base_seed: 5,
    };
    let a = run_grid(&corpus, &spec).unwrap();
    let b = run_grid(&reloaded, &spec).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.best_mean_accuracy > 0.5);
}
