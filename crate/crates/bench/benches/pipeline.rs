//! Throughput of the pipeline's hot paths: generation, template matching
//! (exhaustive versus integral-image), feature extraction, and k-NN.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use rand::Rng;
use speckle_bench::{corner_window, speckle_image};
use speckle_core::{
    best_match, best_match_fast, feature_vector, fit_predict, rng_from_seed, DatasetRow,
    FeatureSet, FeatureVector, KnnConfig, LabeledDataset, MatchMetric, Metric,
};

fn quick<'a>(
    c: &'a mut Criterion,
    name: &str,
) -> criterion::BenchmarkGroup<'a, criterion::measurement::WallTime> {
    let mut group = c.benchmark_group(name);
    group
        .sample_size(10)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2));
    group
}

fn bench_synth(c: &mut Criterion) {
    let mut group = quick(c, "synth");
    group.bench_function("generate_512_grain2", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            black_box(speckle_image(512, 0.7, 2.0, seed))
        })
    });
    group.finish();
}

fn bench_matching(c: &mut Criterion) {
    let field = speckle_image(192, 0.7, 2.0, 7);
    let template = corner_window(&speckle_image(192, 0.7, 2.0, 8), 60);
    let mut group = quick(c, "ncc_192_field_60_template");
    group.bench_function("exhaustive", |b| {
        b.iter(|| best_match(black_box(&field), black_box(&template), MatchMetric::Ncc).unwrap())
    });
    group.bench_function("integral_image", |b| {
        b.iter(|| {
            best_match_fast(black_box(&field), black_box(&template), MatchMetric::Ncc).unwrap()
        })
    });
    group.finish();
}

fn bench_features(c: &mut Criterion) {
    let img = speckle_image(120, 0.7, 2.0, 9);
    let window = corner_window(&img, 120);
    let mut group = quick(c, "features_120_window");
    group.bench_function("eleven", |b| {
        b.iter(|| feature_vector(black_box(&window), FeatureSet::Eleven).unwrap())
    });
    group.bench_function("seventeen", |b| {
        b.iter(|| feature_vector(black_box(&window), FeatureSet::Seventeen).unwrap())
    });
    group.finish();
}

fn random_dataset(seed: u64, rows: usize, tag: &str) -> LabeledDataset {
    let mut rng = rng_from_seed(seed);
    let rows = (0..rows)
        .map(|i| DatasetRow {
            sample_id: format!("{tag}{i}"),
            source_id: "bench".into(),
            region_label: 0,
            class: rng.gen_range(1..=3),
            features: FeatureVector::new(
                FeatureSet::Seventeen,
                (0..17).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            )
            .unwrap(),
        })
        .collect();
    LabeledDataset::new(FeatureSet::Seventeen, rows).unwrap()
}

fn bench_knn(c: &mut Criterion) {
    let train = random_dataset(1, 96, "t");
    let test = random_dataset(2, 96, "p");
    let cfg = KnnConfig {
        k: 5,
        metric: Metric::Euclidean,
        standardize: true,
    };
    let mut group = quick(c, "knn_96x96_17dim");
    group.bench_function("fit_predict_k5", |b| {
        b.iter(|| fit_predict(black_box(&train), black_box(&test), black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_synth,
    bench_matching,
    bench_features,
    bench_knn
);
criterion_main!(benches);
