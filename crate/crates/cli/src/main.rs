//! Command-line front end for the speckle texture-classification pipeline.
//!
//! Exit codes: 0 success, 1 validation problem (arguments, missing paths,
//! unparseable configuration), 2 runtime failure inside a stage. Errors go
//! to standard error as single-line JSON.

mod stages;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use speckle_core::{Error as CoreError, FeatureSet, Metric, SEVENTEEN_NAMES};

/// FNV-1a over the seventeen feature names in column order, so two builds
/// agree on CSV layout exactly when their version strings agree.
fn feature_order_hash() -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for name in SEVENTEEN_NAMES {
        for byte in name.bytes().chain(std::iter::once(b'\n')) {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

fn version_string() -> String {
    format!(
        "{} (feature order {:016x})",
        env!("CARGO_PKG_VERSION"),
        feature_order_hash()
    )
}

fn parse_feature_set(s: &str) -> Result<FeatureSet, String> {
    match s {
        "11" | "eleven" => Ok(FeatureSet::Eleven),
        "17" | "seventeen" => Ok(FeatureSet::Seventeen),
        other => Err(format!("--set accepts 11 or 17, got {other:?}")),
    }
}

fn parse_sample_size(s: &str) -> Result<u32, String> {
    let size: u32 = s
        .parse()
        .map_err(|_| format!("--size must be a number, got {s:?}"))?;
    if [30, 60, 90, 120].contains(&size) {
        Ok(size)
    } else {
        Err(format!("--size accepts 30, 60, 90 or 120, got {size}"))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Threshold,
    Kmeans,
    Both,
}

#[derive(Parser)]
#[command(
    name = "speckle-lab",
    version = version_string(),
    about = "Texture-based classification of laser speckle images"
)]
pub struct Cli {
    /// Worker threads (default: SPECKLE_LAB_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Convert a PGM or PNG image to grayscale binary PGM.
    Convert { input: PathBuf, output: PathBuf },

    /// Write an image's intensity histogram as a two-column CSV.
    Histogram {
        input: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },

    /// Build a segmentation template from histogram valleys.
    Segment {
        image: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Threshold)]
        method: MethodArg,
        /// Keep this many valleys (the deepest ones) instead of all detected.
        #[arg(long)]
        valleys: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Template image path; a JSON sidecar lands next to it.
        #[arg(long)]
        out: PathBuf,
    },

    /// Extract square sample windows from a template's regions.
    Sample {
        image: PathBuf,
        /// Template PGM written by `segment` (with its JSON sidecar).
        #[arg(long)]
        template: PathBuf,
        #[arg(long, value_parser = parse_sample_size)]
        size: u32,
        #[arg(long = "per-region", default_value_t = 4)]
        per_region: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Class label to record in the manifest, if known.
        #[arg(long)]
        class: Option<u8>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },

    /// Compute texture feature vectors for sampled windows.
    Features {
        /// One or more sample manifests written by `sample`.
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long = "set", value_parser = parse_feature_set)]
        set: FeatureSet,
        #[arg(long)]
        out: PathBuf,
    },

    /// Split a labeled feature table into the train/test file quartet.
    Split {
        features: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },

    /// Classify a test table against a training table with k-NN.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long = "train-class")]
        train_class: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long = "test-class")]
        test_class: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_parser = Metric::from_str)]
        metric: Metric,
        #[arg(long = "no-standardize")]
        no_standardize: bool,
        #[arg(long)]
        report: PathBuf,
    },

    /// Generate a labeled synthetic speckle corpus.
    Synth {
        /// Class parameter set; only "preset3" is defined.
        #[arg(long, default_value = "preset3")]
        classes: String,
        #[arg(long = "per-class")]
        per_class: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 192)]
        width: u32,
        #[arg(long, default_value_t = 192)]
        height: u32,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },

    /// Sweep the sampling and classifier grid, report the best configuration.
    Optimize {
        #[arg(long)]
        corpus: PathBuf,
        /// GridSpec as JSON, field for field.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tables: Option<PathBuf>,
        /// Sweep the three pairwise scopes plus all-three instead of the
        /// grid file's single scope.
        #[arg(long = "all-scopes")]
        all_scopes: bool,
    },

    /// One-shot chain: synth, segment, sample, features, split, classify,
    /// optimize. Identical seeds give identical trees except run_meta.json.
    Reproduce {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "per-class", default_value_t = 12)]
        per_class: usize,
        /// Grid sample sizes (default 30,60,90,120).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u32>>,
        /// Grid neighbor counts (default 1,3,5).
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
}

fn init_workers(flag: Option<usize>) -> Result<(), CoreError> {
    let from_env = match std::env::var("SPECKLE_LAB_WORKERS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| {
            CoreError::InvalidParameter(format!(
                "SPECKLE_LAB_WORKERS must be a positive integer, got {v:?}"
            ))
        })?),
        Err(_) => None,
    };
    match flag.or(from_env) {
        None => Ok(()),
        Some(0) => Err(CoreError::InvalidParameter(
            "worker count must be at least 1".into(),
        )),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CoreError::InvalidParameter(format!("worker pool: {e}"))),
    }
}

fn exit_code(err: &CoreError) -> u8 {
    use CoreError as E;
    match err {
        E::InvalidParameter(_)
        | E::UnreadableFile { .. }
        | E::MalformedHeader { .. }
        | E::TruncatedPayload { .. }
        | E::UnsupportedBitDepth { .. }
        | E::UnsupportedFormat { .. }
        | E::Csv(_)
        | E::Json(_) => 1,
        _ => 2,
    }
}

fn fail(err: &CoreError) -> ExitCode {
    let code = exit_code(err);
    let kind = if code == 1 { "validation" } else { "runtime" };
    eprintln!(
        "{}",
        serde_json::json!({ "error": err.to_string(), "kind": kind })
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => {
            if let Err(e) = init_workers(cli.workers) {
                return fail(&e);
            }
            match stages::run(cli.command) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let detail = e
                .to_string()
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" | ");
            eprintln!(
                "{}",
                serde_json::json!({ "error": "invalid arguments", "detail": detail })
            );
            ExitCode::from(1)
        }
    }
}
