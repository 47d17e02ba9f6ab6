//! k-nearest-neighbor classification over labeled feature tables.
//!
//! Distances are exhaustive (no spatial index), predictions are parallel
//! over test rows, and every tie has a deterministic resolution: rows tied
//! with the k-th smallest distance all join the neighbor set, vote ties go
//! to the class with the smaller summed distance, then to the lower label.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, SplitPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Chebyshev,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Euclidean,
        Metric::Manhattan,
        Metric::Chebyshev,
        Metric::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Chebyshev => "chebyshev",
            Metric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: Metric,
    pub standardize: bool,
}

/// Outcome of one train/test evaluation. `confusion[a][p]` counts test
/// rows of actual class `a + 1` predicted as class `p + 1`; the matrix
/// total equals the test row count and `accuracy` is its trace over that
/// total. `predictions` is ordered by test row index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub confusion: [[usize; 3]; 3],
    pub config: KnnConfig,
    pub split_seed: u64,
    pub swapped: bool,
    pub dropped_features: Vec<String>,
    pub predictions: Vec<u8>,
}

/// Distance between two equal-length rows. Cosine distance is
/// 1 minus cosine similarity and rejects zero vectors.
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "distance over mismatched lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    match metric {
        Metric::Euclidean => {
            let mut sum = 0.0;
            for (x, y) in a.iter().zip(b) {
                let d = x - y;
                sum += d * d;
            }
            Ok(sum.sqrt())
        }
        Metric::Manhattan => Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()),
        Metric::Chebyshev => Ok(a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)),
        Metric::Cosine => {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(1.0 - dot / (na.sqrt() * nb.sqrt()))
        }
    }
}

struct PreparedRows {
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    dropped: Vec<String>,
}

/// Project both sides onto z-scores of the train columns (population
/// standard deviation). Constant train columns are dropped from the
/// distance and reported by name; dropping every column is an error.
fn prepare_rows(
    train: &LabeledDataset,
    test: &LabeledDataset,
    standardize: bool,
) -> Result<PreparedRows> {
    let dims = train.set_kind().len();
    let copy_all = |ds: &LabeledDataset| -> Vec<Vec<f64>> {
        ds.rows()
            .iter()
            .map(|r| r.features.values().to_vec())
            .collect()
    };
    if !standardize {
        return Ok(PreparedRows {
            train: copy_all(train),
            test: copy_all(test),
            dropped: Vec::new(),
        });
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; dims];
    for row in train.rows() {
        for (m, v) in mean.iter_mut().zip(row.features.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dims];
    for row in train.rows() {
        for (j, v) in row.features.values().iter().enumerate() {
            let d = v - mean[j];
            var[j] += d * d;
        }
    }
    let sigma: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    let kept: Vec<usize> = (0..dims).filter(|&j| sigma[j] > 0.0).collect();
    if kept.is_empty() {
        return Err(Error::invalid(
            "every feature is constant in the training set",
        ));
    }
    let project = |ds: &LabeledDataset| -> Vec<Vec<f64>> {
        ds.rows()
            .iter()
            .map(|r| {
                let v = r.features.values();
                kept.iter().map(|&j| (v[j] - mean[j]) / sigma[j]).collect()
            })
            .collect()
    };
    let names = train.set_kind().names();
    Ok(PreparedRows {
        train: project(train),
        test: project(test),
        dropped: (0..dims)
            .filter(|&j| sigma[j] == 0.0)
            .map(|j| names[j].to_string())
            .collect(),
    })
}

fn predict_one(
    train: &[Vec<f64>],
    classes: &[u8],
    query: &[f64],
    k: usize,
    metric: Metric,
) -> Result<u8> {
    let mut dists: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, row)| distance(query, row, metric).map(|d| (d, i)))
        .collect::<Result<_>>()?;
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let threshold = dists[k - 1].0;
    let mut votes: BTreeMap<u8, (usize, f64)> = BTreeMap::new();
    for &(d, i) in dists.iter().take_while(|&&(d, _)| d <= threshold) {
        let entry = votes.entry(classes[i]).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += d;
    }
    let mut best: Option<(u8, usize, f64)> = None;
    for (&label, &(count, sum)) in &votes {
        let wins = match best {
            None => true,
            Some((_, bc, bs)) => count > bc || (count == bc && sum < bs),
        };
        if wins {
            best = Some((label, count, sum));
        }
    }
    Ok(best.expect("neighbor set is nonempty").0)
}

/// Classify every test row against the training rows.
pub fn fit_predict(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &KnnConfig,
) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if train.set_kind() != test.set_kind() {
        return Err(Error::SetKindMismatch {
            train: format!("{:?}", train.set_kind()),
            test: format!("{:?}", test.set_kind()),
        });
    }
    if cfg.k == 0 || cfg.k > train.len() {
        return Err(Error::invalid(format!(
            "k = {} outside 1..={} training rows",
            cfg.k,
            train.len()
        )));
    }
    let prepared = prepare_rows(train, test, cfg.standardize)?;
    let classes: Vec<u8> = train.rows().iter().map(|r| r.class).collect();
    let predictions: Vec<u8> = prepared
        .test
        .par_iter()
        .map(|query| predict_one(&prepared.train, &classes, query, cfg.k, cfg.metric))
        .collect::<Result<_>>()?;
    let mut confusion = [[0usize; 3]; 3];
    for (row, &predicted) in test.rows().iter().zip(&predictions) {
        confusion[row.class as usize - 1][predicted as usize - 1] += 1;
    }
    let trace: usize = (0..3).map(|i| confusion[i][i]).sum();
    Ok(EvalResult {
        accuracy: trace as f64 / test.len() as f64,
        confusion,
        config: cfg.clone(),
        split_seed: 0,
        swapped: false,
        dropped_features: prepared.dropped,
        predictions,
    })
}

/// Run the two-test protocol on a split: evaluate forward, then with the
/// sides exchanged, and stamp each result with the split seed.
pub fn evaluate_split(sp: &SplitPair, cfg: &KnnConfig) -> Result<[EvalResult; 2]> {
    let mut forward = fit_predict(&sp.train, &sp.test, cfg)?;
    forward.split_seed = sp.seed;
    let mut reversed = fit_predict(&sp.test, &sp.train, cfg)?;
    reversed.split_seed = sp.seed;
    reversed.swapped = true;
    Ok([forward, reversed])
}
