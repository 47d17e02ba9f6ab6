//! Labeled feature tables, train/test splitting, and CSV interchange.
//!
//! A dataset is written as four aligned files: `train.csv` / `test.csv`
//! carry provenance plus feature columns, `train_class.csv` /
//! `test_class.csv` carry the single class column row-aligned with them.
//! Feature values serialize with 17 significant digits, so a write/read
//! cycle reproduces every f64 bit-exactly.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureVector, ELEVEN_NAMES, SEVENTEEN_NAMES};
use crate::seeding::{self, domain};

/// One sample: its features, class label in 1..=3, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub sample_id: String,
    pub source_id: String,
    pub region_label: u8,
    pub class: u8,
    pub features: FeatureVector,
}

/// Rows of one feature-set kind with unique sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    set_kind: FeatureSet,
    rows: Vec<DatasetRow>,
}

impl LabeledDataset {
    pub fn new(set_kind: FeatureSet, rows: Vec<DatasetRow>) -> Result<Self> {
        let mut ids = HashSet::new();
        for row in &rows {
            if row.features.set_kind() != set_kind {
                return Err(Error::SetKindMismatch {
                    train: format!("{set_kind:?}"),
                    test: format!("{:?}", row.features.set_kind()),
                });
            }
            if !(1..=3).contains(&row.class) {
                return Err(Error::invalid(format!(
                    "class {} outside 1..=3 in sample {}",
                    row.class, row.sample_id
                )));
            }
            if !ids.insert(row.sample_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate sample id {}",
                    row.sample_id
                )));
            }
        }
        Ok(Self { set_kind, rows })
    }

    pub fn set_kind(&self) -> FeatureSet {
        self.set_kind
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row.class).or_insert(0) += 1;
        }
        counts
    }

    /// Rows filtered to the given classes, keeping order.
    pub fn restrict_to_classes(&self, classes: &[u8]) -> Result<LabeledDataset> {
        let rows = self
            .rows
            .iter()
            .filter(|r| classes.contains(&r.class))
            .cloned()
            .collect();
        LabeledDataset::new(self.set_kind, rows)
    }
}

/// A train/test division and the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub seed: u64,
}

/// Shuffle each class independently (stream derived from the seed and the
/// class label) and send the first half to train; odd classes give train
/// the extra row. Row order within each side follows the input dataset.
pub fn split(ds: &LabeledDataset, seed: u64) -> Result<SplitPair> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, row) in ds.rows().iter().enumerate() {
        by_class.entry(row.class).or_default().push(i);
    }
    let deficits: Vec<String> = by_class
        .iter()
        .filter(|(_, idxs)| idxs.len() < 2)
        .map(|(class, idxs)| format!("class {class} has {} samples, needs at least 2", idxs.len()))
        .collect();
    if !deficits.is_empty() {
        return Err(Error::InsufficientClassSupport { deficits });
    }
    let mut in_train = vec![false; ds.len()];
    for (&class, idxs) in &by_class {
        let mut order = idxs.clone();
        let mut rng =
            seeding::rng_from_seed(seeding::derive_seed(seed, &[domain::SPLIT, class as u64]));
        order.shuffle(&mut rng);
        for &i in &order[..order.len().div_ceil(2)] {
            in_train[i] = true;
        }
    }
    let side = |want: bool| -> Vec<DatasetRow> {
        ds.rows()
            .iter()
            .enumerate()
            .filter(|(i, _)| in_train[*i] == want)
            .map(|(_, r)| r.clone())
            .collect()
    };
    Ok(SplitPair {
        train: LabeledDataset::new(ds.set_kind(), side(true))?,
        test: LabeledDataset::new(ds.set_kind(), side(false))?,
        seed,
    })
}

/// Exchange the two sides. Applying it twice returns the original.
pub fn swap(sp: SplitPair) -> SplitPair {
    SplitPair {
        train: sp.test,
        test: sp.train,
        seed: sp.seed,
    }
}

/// Check that `image_classes` can support classification over the
/// `expected` class set: at least 8 in-scope images and at least 2 per
/// expected class. Returns warnings for expected classes with fewer than 4
/// images; missing or thin classes and a short total are hard errors.
pub fn enforce_minimum(image_classes: &[u8], expected: &[u8]) -> Result<Vec<String>> {
    let mut counts: BTreeMap<u8, usize> = expected.iter().map(|&c| (c, 0)).collect();
    let mut total = 0usize;
    for &c in image_classes {
        if let Some(slot) = counts.get_mut(&c) {
            *slot += 1;
            total += 1;
        }
    }
    let mut deficits = Vec::new();
    if total < 8 {
        deficits.push(format!("{total} in-scope images, need at least 8"));
    }
    for (&class, &n) in &counts {
        if n < 2 {
            deficits.push(format!("class {class} has {n} images, needs at least 2"));
        }
    }
    if !deficits.is_empty() {
        return Err(Error::InsufficientClassSupport { deficits });
    }
    Ok(counts
        .iter()
        .filter(|(_, &n)| n < 4)
        .map(|(class, n)| format!("class {class} has only {n} images; 4 or more are advised"))
        .collect())
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_for(set_kind: FeatureSet, include_class: bool) -> Vec<String> {
    let mut h = vec![
        "sample_id".to_string(),
        "source_id".to_string(),
        "region_label".to_string(),
    ];
    h.extend(set_kind.names().iter().map(|s| s.to_string()));
    if include_class {
        h.push("class".to_string());
    }
    h
}

/// Write provenance and feature columns, optionally with a trailing class
/// column.
pub fn write_feature_csv(
    ds: &LabeledDataset,
    path: impl AsRef<Path>,
    include_class: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(header_for(ds.set_kind(), include_class))?;
    for row in ds.rows() {
        let mut record = vec![
            row.sample_id.clone(),
            row.source_id.clone(),
            row.region_label.to_string(),
        ];
        record.extend(row.features.values().iter().map(|&v| format_value(v)));
        if include_class {
            record.push(row.class.to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the single aligned class column.
pub fn write_class_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["class"])?;
    for row in ds.rows() {
        w.write_record([row.class.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

struct ParsedFeatures {
    set_kind: FeatureSet,
    has_class: bool,
    rows: Vec<DatasetRow>,
}

fn infer_set_kind(path: &Path, feature_names: &[&str]) -> Result<(FeatureSet, bool)> {
    let (names, has_class) = match feature_names.split_last() {
        Some((&"class", rest)) => (rest, true),
        _ => (feature_names, false),
    };
    if names == ELEVEN_NAMES {
        Ok((FeatureSet::Eleven, has_class))
    } else if names == SEVENTEEN_NAMES {
        Ok((FeatureSet::Seventeen, has_class))
    } else {
        Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("unrecognized feature columns {names:?}"),
        })
    }
}

fn parse_feature_csv(path: &Path) -> Result<ParsedFeatures> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::UnreadableFile {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4
        || cols[0] != "sample_id"
        || cols[1] != "source_id"
        || cols[2] != "region_label"
    {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("expected sample_id, source_id, region_label, features; got {cols:?}"),
        });
    }
    let (set_kind, has_class) = infer_set_kind(path, &cols[3..])?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let expected_len = 3 + set_kind.len() + usize::from(has_class);
        if record.len() != expected_len {
            return Err(Error::invalid(format!(
                "{} fields in a row of {}, expected {expected_len}",
                record.len(),
                path.display()
            )));
        }
        let values: Vec<f64> = record
            .iter()
            .skip(3)
            .take(set_kind.len())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad feature value {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let class = if has_class {
            record[record.len() - 1]
                .parse::<u8>()
                .map_err(|e| Error::invalid(format!("bad class value: {e}")))?
        } else {
            1
        };
        rows.push(DatasetRow {
            sample_id: record[0].to_string(),
            source_id: record[1].to_string(),
            region_label: record[2]
                .parse()
                .map_err(|e| Error::invalid(format!("bad region label: {e}")))?,
            class,
            features: FeatureVector::new(set_kind, values)?,
        });
    }
    Ok(ParsedFeatures {
        set_kind,
        has_class,
        rows,
    })
}

/// Read a feature CSV whose rows carry their class column.
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let parsed = parse_feature_csv(path)?;
    if !parsed.has_class {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "missing class column".into(),
        });
    }
    LabeledDataset::new(parsed.set_kind, parsed.rows)
}

fn read_class_csv(path: &Path) -> Result<Vec<u8>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::UnreadableFile {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["class"] {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "expected a single class column".into(),
        });
    }
    let mut classes = Vec::new();
    for record in reader.records() {
        classes.push(
            record?[0]
                .parse::<u8>()
                .map_err(|e| Error::invalid(format!("bad class value: {e}")))?,
        );
    }
    Ok(classes)
}

/// Write the four-file quartet into `dir`.
pub fn save_split(sp: &SplitPair, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_feature_csv(&sp.train, dir.join("train.csv"), false)?;
    write_feature_csv(&sp.test, dir.join("test.csv"), false)?;
    write_class_csv(&sp.train, dir.join("train_class.csv"))?;
    write_class_csv(&sp.test, dir.join("test_class.csv"))?;
    Ok(())
}

/// Read a feature CSV paired with its row-aligned class CSV.
pub fn load_table(features: impl AsRef<Path>, classes: impl AsRef<Path>) -> Result<LabeledDataset> {
    let parsed = parse_feature_csv(features.as_ref())?;
    let class_list = read_class_csv(classes.as_ref())?;
    if class_list.len() != parsed.rows.len() {
        return Err(Error::invalid(format!(
            "{} has {} rows but {} has {}",
            features.as_ref().display(),
            parsed.rows.len(),
            classes.as_ref().display(),
            class_list.len()
        )));
    }
    let rows = parsed
        .rows
        .into_iter()
        .zip(class_list)
        .map(|(mut row, class)| {
            row.class = class;
            row
        })
        .collect();
    LabeledDataset::new(parsed.set_kind, rows)
}

/// Read the quartet back as (train, test).
pub fn load_split(dir: impl AsRef<Path>) -> Result<(LabeledDataset, LabeledDataset)> {
    let dir = dir.as_ref();
    Ok((
        load_table(dir.join("train.csv"), dir.join("train_class.csv"))?,
        load_table(dir.join("test.csv"), dir.join("test_class.csv"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn row(id: usize, class: u8, seed: u64) -> DatasetRow {
        let mut rng = seeding::rng_from_seed(seed);
        let values: Vec<f64> = (0..11).map(|_| rng.gen_range(-1e3..1e3)).collect();
        DatasetRow {
            sample_id: format!("s{id:03}"),
            source_id: format!("img{}", id / 6),
            region_label: (id % 3) as u8,
            class,
            features: FeatureVector::new(FeatureSet::Eleven, values).unwrap(),
        }
    }

    fn balanced_dataset(per_class: usize) -> LabeledDataset {
        let rows = (0..per_class * 3)
            .map(|i| row(i, (i % 3 + 1) as u8, i as u64))
            .collect();
        LabeledDataset::new(FeatureSet::Eleven, rows).unwrap()
    }

    #[test]
    fn twelve_rows_split_six_six_two_per_class() {
        let ds = balanced_dataset(4);
        let sp = split(&ds, 5).unwrap();
        assert_eq!(sp.train.len(), 6);
        assert_eq!(sp.test.len(), 6);
        for side in [&sp.train, &sp.test] {
            for (_, count) in side.class_counts() {
                assert_eq!(count, 2);
            }
        }
        let train_ids: HashSet<_> = sp.train.rows().iter().map(|r| &r.sample_id).collect();
        assert!(sp
            .test
            .rows()
            .iter()
            .all(|r| !train_ids.contains(&r.sample_id)));
    }

    #[test]
    fn same_seed_gives_identical_split() {
        let ds = balanced_dataset(5);
        assert_eq!(split(&ds, 9).unwrap(), split(&ds, 9).unwrap());
    }

    #[test]
    fn swap_is_an_involution() {
        let ds = balanced_dataset(4);
        let sp = split(&ds, 3).unwrap();
        let swapped = swap(sp.clone());
        assert_eq!(swapped.train, sp.test);
        assert_eq!(swapped.test, sp.train);
        assert_eq!(swap(swapped), sp);
    }

    #[test]
    fn thin_class_is_an_error() {
        let mut rows: Vec<DatasetRow> = (0..4).map(|i| row(i, 1, i as u64)).collect();
        rows.push(row(10, 2, 10));
        let ds = LabeledDataset::new(FeatureSet::Eleven, rows).unwrap();
        match split(&ds, 0).unwrap_err() {
            Error::InsufficientClassSupport { deficits } => {
                assert!(deficits.iter().any(|d| d.contains("class 2")));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn minimum_rule_table() {
        assert!(enforce_minimum(&[1, 1, 1, 1, 2, 2, 2, 2], &[1, 2]).is_ok());
        assert!(enforce_minimum(&[1, 1, 1, 1, 2, 2, 2], &[1, 2]).is_err());

        // Nine images over two classes: fine pairwise, not for three classes.
        let nine = [1, 1, 1, 1, 1, 2, 2, 2, 2];
        assert!(enforce_minimum(&nine, &[1, 2]).is_ok());
        match enforce_minimum(&nine, &[1, 2, 3]).unwrap_err() {
            Error::InsufficientClassSupport { deficits } => {
                assert!(deficits.iter().any(|d| d.contains("class 3")));
            }
            other => panic!("unexpected error {other:?}"),
        }

        let warnings = enforce_minimum(&[1, 1, 1, 2, 2, 2, 2, 2], &[1, 2]).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("class 1"));
    }

    #[test]
    fn out_of_scope_images_do_not_count() {
        // Ten images, but only six in scope.
        let classes = [1, 1, 1, 2, 2, 2, 3, 3, 3, 3];
        assert!(enforce_minimum(&classes, &[1, 2]).is_err());
        assert!(enforce_minimum(&classes, &[1, 2, 3]).is_ok());
    }

    #[test]
    fn quartet_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ds = balanced_dataset(4);
        let sp = split(&ds, 77).unwrap();
        save_split(&sp, dir.path()).unwrap();
        let (train, test) = load_split(dir.path()).unwrap();
        assert_eq!(train, sp.train);
        assert_eq!(test, sp.test);
        for (orig, read) in sp.train.rows().iter().zip(train.rows()) {
            for (a, b) in orig.features.values().iter().zip(read.features.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn feature_csv_with_class_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let ds = balanced_dataset(3);
        write_feature_csv(&ds, &path, true).unwrap();
        let back = read_feature_csv(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn mangled_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "sample_id,source_id,oops\n").unwrap();
        assert!(matches!(
            read_feature_csv(&path).unwrap_err(),
            Error::MalformedHeader { .. }
        ));
    }

    #[test]
    fn wrong_class_value_is_rejected() {
        let bad = row(0, 1, 0);
        let mut rows = vec![bad];
        rows[0].class = 4;
        assert!(LabeledDataset::new(FeatureSet::Eleven, rows).is_err());
    }

    proptest! {
        #[test]
        fn split_is_disjoint_and_balanced(per_class in 2usize..10, seed in any::<u64>()) {
            let ds = balanced_dataset(per_class);
            let sp = split(&ds, seed).unwrap();
            prop_assert_eq!(sp.train.len() + sp.test.len(), ds.len());
            let train_ids: HashSet<_> =
                sp.train.rows().iter().map(|r| r.sample_id.clone()).collect();
            for r in sp.test.rows() {
                prop_assert!(!train_ids.contains(&r.sample_id));
            }
            for (&class, &count) in &sp.train.class_counts() {
                let total = per_class;
                prop_assert_eq!(count, total.div_ceil(2), "class {}", class);
            }
            for counts in [sp.train.class_counts(), sp.test.class_counts()] {
                let max = counts.values().max().unwrap();
                let min = counts.values().min().unwrap();
                prop_assert!(max - min <= 1);
            }
        }

        #[test]
        fn csv_values_survive_bit_exactly(bits in proptest::collection::vec(any::<u64>(), 11)) {
            let values: Vec<f64> = bits
                .iter()
                .map(|&b| {
                    let v = f64::from_bits(b);
                    if v.is_finite() { v } else { 0.0 }
                })
                .collect();
            let reparsed: Vec<f64> = values
                .iter()
                .map(|v| format_value(*v).parse::<f64>().unwrap())
                .collect();
            for (a, b) in values.iter().zip(&reparsed) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
