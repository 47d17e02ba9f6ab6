//! Texture-based classification of laser speckle images.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`raster`]: image containers, grayscale conversion, histograms, PGM/PNG I/O.
//! 2. [`segment`]: histogram valley detection and intensity-based segmentation.
//! 3. [`sampling`]: square sample extraction from labeled regions and
//!    template matching for locating those samples in other images.
//! 4. [`features`]: local-statistics and co-occurrence texture features.
//! 5. [`synth`]: synthetic speckle image generation for reproducible corpora.
//! 6. [`dataset`]: feature tables, train/test splits, and CSV interchange.
//! 7. [`knn`]: k-nearest-neighbor classification and evaluation.
//! 8. [`optimizer`]: grid search over sampling and classifier parameters.
//!
//! Every randomized step takes an explicit seed and derives per-task streams
//! via [`seeding::derive_seed`], so identical inputs give identical outputs
//! regardless of thread count.

pub mod dataset;
pub mod error;
pub mod features;
pub mod knn;
pub mod optimizer;
pub mod raster;
pub mod sampling;
pub mod seeding;
pub mod segment;
pub mod synth;

pub use dataset::{
    enforce_minimum, load_split, load_table, read_feature_csv, save_split, split, swap,
    write_class_csv, write_feature_csv, DatasetRow, LabeledDataset, SplitPair,
};
pub use error::{Error, Result};
pub use features::{
    feature_vector, glcm, haralick_five, FeatureSet, FeatureVector, Glcm, HaralickFeatures,
    ELEVEN_NAMES, GLCM_OFFSETS, SEVENTEEN_NAMES,
};
pub use knn::{distance, evaluate_split, fit_predict, EvalResult, KnnConfig, Metric};
pub use optimizer::{
    load_reports, report_tables, run_grid, run_scopes, save_reports, save_tables, standard_scopes,
    ClassScope, ConfigResult, GridConfig, GridSpec, OptimizationReport, Tables,
};
pub use raster::io::{load_gray, load_image, save_gray};
pub use raster::{histogram, to_grayscale, GrayImage, Histogram, LoadedImage, RgbImage};
pub use sampling::{
    best_match, best_match_fast, extract_samples, ncc_score, ssd_score, ExtractedSamples,
    MatchMetric, MatchScore, SampleWindow,
};
pub use seeding::{derive_seed, rng_from_seed};
pub use segment::{
    detect_valleys, kmeans_segment, threshold_segment, SegmentationMethod, SegmentationTemplate,
    ValleyReport,
};
pub use synth::{
    generate_speckle, load_corpus, make_corpus, measure_contrast, preset3, save_corpus, Corpus,
    CorpusImage, CorpusManifest, GeneratedSpeckle, SpeckleParams, SpeckleStats,
};
