//! Dataset ingestion and preparation.
//!
//! Feature matrices are stored features-in-rows (d×n): row i is feature i,
//! column j is sample j. CSV files are row-per-sample, so the loader
//! transposes on ingest. Labels are remapped to a dense `[0, k)` encoding;
//! the original label values are kept in [`DatasetMeta`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature standardization constants (of the raw matrix).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub mean: f64,
    /// Population standard deviation; 0.0 marks a constant feature.
    pub std: f64,
}

/// Provenance metadata carried by a [`Dataset`], serializable as a JSON sidecar.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Class index -> original label value as it appeared in the source.
    pub label_mapping: Vec<String>,
    /// Set once [`standardize`] has run.
    pub standardization: Option<Vec<FeatureScale>>,
}

/// A supervised dataset: d features × n samples with integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Option<Vec<String>>,
    meta: DatasetMeta,
}

impl Dataset {
    /// Builds a dataset and checks its invariants: labels dense in `[0, k)`
    /// with every class present, d >= 1, n >= 2, k >= 2, all features finite.
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_names: Option<Vec<String>>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let (d, n) = (features.nrows(), features.ncols());
        if d < 1 {
            return Err(Error::Data("dataset needs at least one feature".into()));
        }
        if n < 2 {
            return Err(Error::Data(format!(
                "dataset needs at least 2 samples, got {n}"
            )));
        }
        if n_classes < 2 {
            return Err(Error::Data(format!(
                "dataset needs at least 2 classes, got {n_classes}"
            )));
        }
        if labels.len() != n {
            return Err(Error::Data(format!(
                "label count {} does not match sample count {n}",
                labels.len()
            )));
        }
        let mut seen = vec![false; n_classes];
        for (j, &label) in labels.iter().enumerate() {
            if label >= n_classes {
                return Err(Error::Data(format!(
                    "label {label} of sample {j} is outside [0, {n_classes})"
                )));
            }
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Data(format!("class {missing} has no samples")));
        }
        if let Some(names) = &feature_names {
            if names.len() != d {
                return Err(Error::Data(format!(
                    "feature name count {} does not match feature count {d}",
                    names.len()
                )));
            }
        }
        for i in 0..d {
            for j in 0..n {
                if !features[(i, j)].is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value {} at feature {i}, sample {j}",
                        features[(i, j)]
                    )));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_names,
            meta,
        })
    }

    /// Feature matrix, d×n.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Class label per sample, values in `[0, n_classes)`.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_features(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }

    /// A new dataset restricted to `feature_rows` (in the given order) and
    /// `sample_cols`. Used by the evaluation harness; skips re-validation of
    /// class coverage, so callers must keep at least one sample per class.
    pub(crate) fn restrict(&self, feature_rows: &[usize], sample_cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(feature_rows.len(), sample_cols.len(), |i, j| {
            self.features[(feature_rows[i], sample_cols[j])]
        })
    }
}

/// One-hot encoded labels: k×n with entries in {0, 1}, one 1 per column.
#[derive(Debug, Clone)]
pub struct OneHotLabels {
    matrix: DMatrix<f64>,
}

impl OneHotLabels {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_classes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.ncols()
    }
}

/// A deterministic 70/30 train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// CSV parsing options.
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

fn io_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Loads a rectangular CSV table into a [`Dataset`].
///
/// The label column may be addressed by header name or zero-based index; every
/// other column must parse as a finite number. Labels are remapped to `[0, k)`
/// — numerically when all labels parse as integers, lexicographically
/// otherwise — and the mapping is recorded in the metadata.
pub fn load_csv(path: &Path, label_column: &LabelColumn, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(false)
        .from_path(path)
        .map_err(|e| io_err(path, e.to_string()))?;

    let header: Option<Vec<String>> = if options.has_header {
        Some(
            reader
                .headers()
                .map_err(|e| io_err(path, e.to_string()))?
                .iter()
                .map(str::to_owned)
                .collect(),
        )
    } else {
        None
    };

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e.to_string()))?;
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(io_err(path, "no data rows"));
    }
    let n_cols = rows[0].len();

    let label_idx = match label_column {
        LabelColumn::Index(i) => {
            if *i >= n_cols {
                return Err(Error::Data(format!(
                    "label column index {i} out of range for {n_cols} columns"
                )));
            }
            *i
        }
        LabelColumn::Name(name) => {
            let header = header.as_ref().ok_or_else(|| {
                Error::Config("label column by name requires a header row".into())
            })?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("label column {name:?} not found in header")))?
        }
    };
    if n_cols < 2 {
        return Err(Error::Data(
            "table needs a label column and at least one feature column".into(),
        ));
    }

    let n = rows.len();
    let d = n_cols - 1;
    let feature_cols: Vec<usize> = (0..n_cols).filter(|&c| c != label_idx).collect();

    // Header/data row offset only matters for error messages.
    let row_offset = if options.has_header { 2 } else { 1 };

    let mut raw_labels: Vec<String> = Vec::with_capacity(n);
    let mut features = DMatrix::<f64>::zeros(d, n);
    for (j, record) in rows.iter().enumerate() {
        for (i, &col) in feature_cols.iter().enumerate() {
            let cell = record.get(col).ok_or_else(|| {
                io_err(
                    path,
                    format!("row {} is missing column {}", j + row_offset, col + 1),
                )
            })?;
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "non-numeric feature cell {cell:?} at row {}, column {}",
                    j + row_offset,
                    col + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite feature cell {cell:?} at row {}, column {}",
                    j + row_offset,
                    col + 1
                )));
            }
            features[(i, j)] = value;
        }
        let label_cell = record.get(label_idx).ok_or_else(|| {
            io_err(
                path,
                format!(
                    "row {} is missing label column {}",
                    j + row_offset,
                    label_idx + 1
                ),
            )
        })?;
        raw_labels.push(label_cell.trim().to_owned());
    }

    // Dense label encoding: numeric order when every label parses as an
    // integer, lexicographic otherwise.
    let mut distinct: Vec<String> = {
        let set: BTreeMap<&str, ()> = raw_labels.iter().map(|l| (l.as_str(), ())).collect();
        set.into_keys().map(str::to_owned).collect()
    };
    if distinct.len() < 2 {
        return Err(Error::Data(format!(
            "fewer than 2 distinct labels: found {:?}",
            distinct
        )));
    }
    let all_numeric = distinct.iter().all(|l| l.parse::<i64>().is_ok());
    if all_numeric {
        distinct.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    let n_classes = distinct.len();
    let labels: Vec<usize> = {
        let index_of: BTreeMap<&str, usize> = distinct
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        raw_labels.iter().map(|l| index_of[l.as_str()]).collect()
    };

    let feature_names = header.map(|h| {
        feature_cols
            .iter()
            .map(|&c| h[c].clone())
            .collect::<Vec<_>>()
    });

    let meta = DatasetMeta {
        label_mapping: distinct,
        standardization: None,
    };
    Dataset::new(features, labels, n_classes, feature_names, meta)
}

/// Z-score standardizes every feature row to mean 0 and population std 1.
///
/// Constant rows become all zeros. The original mean/std pairs are recorded
/// in the metadata so a run can be reproduced from its sidecar.
pub fn standardize(ds: &Dataset) -> Dataset {
    let d = ds.n_features();
    let n = ds.n_samples();
    let mut features = ds.features.clone();
    let mut scales = Vec::with_capacity(d);
    for i in 0..d {
        let mean = features.row(i).sum() / n as f64;
        let var = features.row(i).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 0.0 {
            for j in 0..n {
                features[(i, j)] = (features[(i, j)] - mean) / std;
            }
        } else {
            for j in 0..n {
                features[(i, j)] = 0.0;
            }
        }
        scales.push(FeatureScale { mean, std });
    }
    let mut meta = ds.meta.clone();
    meta.standardization = Some(scales);
    Dataset {
        features,
        labels: ds.labels.clone(),
        n_classes: ds.n_classes,
        feature_names: ds.feature_names.clone(),
        meta,
    }
}

/// One-hot encodes the labels into a k×n {0,1} matrix.
pub fn one_hot(ds: &Dataset) -> OneHotLabels {
    let k = ds.n_classes;
    let n = ds.n_samples();
    let mut matrix = DMatrix::<f64>::zeros(k, n);
    for (j, &label) in ds.labels.iter().enumerate() {
        matrix[(label, j)] = 1.0;
    }
    OneHotLabels { matrix }
}

/// Splits samples 70/30, stratified by class where counts permit.
///
/// `|train| = round(0.7 n)` exactly; per-class train counts follow the
/// largest-remainder rule, and each class keeps at least one sample on both
/// sides whenever it has the samples to do so. Deterministic for a fixed seed.
pub fn split(ds: &Dataset, seed: u64) -> Result<SplitIndices> {
    let n = ds.n_samples();
    if n < 10 {
        return Err(Error::Data(format!(
            "splitting requires at least 10 samples, got {n}"
        )));
    }
    let counts = ds.class_counts();
    if let Some(c) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Data(format!(
            "class {c} has fewer than 2 samples and cannot be split"
        )));
    }

    let k = ds.n_classes;
    let target_train = (0.7 * n as f64).round() as usize;

    // Largest-remainder allocation of train slots, capped so every class keeps
    // a test sample; the cap is lifted only if the target is otherwise
    // unreachable.
    let mut take = Vec::with_capacity(k);
    let mut remainders = Vec::with_capacity(k);
    for &count in &counts {
        let ideal = 0.7 * count as f64;
        let base = (ideal.floor() as usize).clamp(1, count - 1);
        remainders.push(ideal - ideal.floor());
        take.push(base);
    }
    let mut total: usize = take.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    let mut cursor = 0;
    while total < target_train && cursor < order.len() {
        let c = order[cursor];
        if take[c] < counts[c] - 1 {
            take[c] += 1;
            total += 1;
        } else {
            cursor += 1;
        }
    }
    // Degenerate layouts (many tiny classes) may need to empty a test side.
    let mut by_size: Vec<usize> = (0..k).collect();
    by_size.sort_by_key(|&c| std::cmp::Reverse(counts[c]));
    while total < target_train {
        let mut advanced = false;
        for &c in &by_size {
            if take[c] < counts[c] {
                take[c] += 1;
                total += 1;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return Err(Error::Data("cannot reach a 7:3 split".into()));
        }
    }
    while total > target_train {
        let c = *by_size
            .iter()
            .find(|&&c| take[c] > 1)
            .ok_or_else(|| Error::Data("cannot reach a 7:3 split".into()))?;
        take[c] -= 1;
        total -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(target_train);
    let mut test = Vec::with_capacity(n - target_train);
    for class in 0..k {
        let mut members: Vec<usize> = ds
            .labels
            .iter()
            .enumerate()
            .filter_map(|(j, &l)| (l == class).then_some(j))
            .collect();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..take[class]]);
        test.extend_from_slice(&members[take[class]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test, seed })
}

/// Renders the metadata sidecar content (label mapping and standardization
/// constants) as a debug string for error messages and logs.
pub fn describe_meta(meta: &DatasetMeta) -> String {
    let mut s = String::new();
    let _ = write!(s, "classes={:?}", meta.label_mapping);
    if let Some(scales) = &meta.standardization {
        let _ = write!(s, ", standardized {} features", scales.len());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn toy_dataset(labels: &[usize], k: usize) -> Dataset {
        let n = labels.len();
        let features = DMatrix::from_fn(3, n, |i, j| (i * n + j) as f64);
        Dataset::new(features, labels.to_vec(), k, None, DatasetMeta::default()).unwrap()
    }

    #[test]
    fn load_small_csv() {
        let f = write_csv("f1,f2,class\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n");
        let ds = load_csv(
            f.path(),
            &LabelColumn::Name("class".into()),
            &CsvOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_samples(), 4);
        assert_eq!(ds.n_classes(), 2);
        // d×n orientation: feature f1 is row 0.
        assert_eq!(ds.features()[(0, 2)], 5.0);
        assert_eq!(ds.labels(), &[0, 1, 0, 1]);
        assert_eq!(ds.meta().label_mapping, vec!["a", "b"]);
        assert_eq!(
            ds.feature_names().unwrap(),
            &["f1".to_string(), "f2".to_string()]
        );
    }

    #[test]
    fn load_csv_numeric_labels_sorted_numerically() {
        let f = write_csv("f1,class\n1,10\n2,2\n3,10\n4,2\n");
        let ds = load_csv(
            f.path(),
            &LabelColumn::Name("class".into()),
            &CsvOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.meta().label_mapping, vec!["2", "10"]);
        assert_eq!(ds.labels(), &[1, 0, 1, 0]);
    }

    #[test]
    fn load_csv_rejects_nan_cell() {
        let f = write_csv("f1,f2,class\n1,2,a\n3,NaN,b\n");
        let err = load_csv(
            f.path(),
            &LabelColumn::Name("class".into()),
            &CsvOptions::default(),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "message was: {msg}");
        assert!(msg.contains("column 2"), "message was: {msg}");
    }

    #[test]
    fn load_csv_rejects_single_class() {
        let f = write_csv("f1,class\n1,a\n2,a\n");
        let err = load_csv(
            f.path(),
            &LabelColumn::Name("class".into()),
            &CsvOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn load_csv_by_index_without_header() {
        let f = write_csv("1,2,a\n3,4,b\n");
        let opts = CsvOptions {
            has_header: false,
            ..CsvOptions::default()
        };
        let ds = load_csv(f.path(), &LabelColumn::Index(2), &opts).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_samples(), 2);
        assert!(ds.feature_names().is_none());
    }

    #[test]
    fn load_csv_missing_file_is_io_error() {
        let err = load_csv(
            Path::new("/nonexistent/file.csv"),
            &LabelColumn::Index(0),
            &CsvOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn standardize_row_of_two() {
        let features = DMatrix::from_row_slice(1, 2, &[1.0, 3.0]);
        let ds = Dataset::new(features, vec![0, 1], 2, None, DatasetMeta::default()).unwrap();
        let std = standardize(&ds);
        // mean 2, population std 1
        assert_abs_diff_eq!(std.features()[(0, 0)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(std.features()[(0, 1)], 1.0, epsilon = 1e-15);
        let scales = std.meta().standardization.as_ref().unwrap();
        assert_abs_diff_eq!(scales[0].mean, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scales[0].std, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn standardize_constant_row_becomes_zero() {
        let features = DMatrix::from_row_slice(2, 3, &[5.0, 5.0, 5.0, 1.0, 2.0, 3.0]);
        let ds = Dataset::new(features, vec![0, 1, 0], 2, None, DatasetMeta::default()).unwrap();
        let std = standardize(&ds);
        for j in 0..3 {
            assert_eq!(std.features()[(0, j)], 0.0);
        }
        assert_eq!(std.meta().standardization.as_ref().unwrap()[0].std, 0.0);
    }

    #[test]
    fn standardize_is_idempotent() {
        let features = DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 0.5, 9.0, 3.0, 3.5, -1.0, 0.0]);
        let ds = Dataset::new(features, vec![0, 1, 0, 1], 2, None, DatasetMeta::default()).unwrap();
        let once = standardize(&ds);
        let twice = standardize(&once);
        for i in 0..2 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    once.features()[(i, j)],
                    twice.features()[(i, j)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn one_hot_small() {
        let ds = toy_dataset(&[0, 1, 0], 2);
        let oh = one_hot(&ds);
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(oh.matrix(), &expected);
    }

    #[test]
    fn one_hot_columns_are_identity_permutation() {
        let ds = toy_dataset(&[2, 0, 1], 3);
        let oh = one_hot(&ds);
        for j in 0..3 {
            assert_eq!(oh.matrix().column(j).sum(), 1.0);
        }
        assert_eq!(oh.matrix()[(2, 0)], 1.0);
        assert_eq!(oh.matrix()[(0, 1)], 1.0);
        assert_eq!(oh.matrix()[(1, 2)], 1.0);
    }

    #[test]
    fn split_balanced_ten() {
        let ds = toy_dataset(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2);
        let s = split(&ds, 7).unwrap();
        assert_eq!(s.train.len(), 7);
        assert_eq!(s.test.len(), 3);
        for part in [&s.train, &s.test] {
            assert!(part.iter().any(|&j| ds.labels()[j] == 0));
            assert!(part.iter().any(|&j| ds.labels()[j] == 1));
        }
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let ds = toy_dataset(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2);
        assert_eq!(split(&ds, 7).unwrap(), split(&ds, 7).unwrap());
    }

    #[test]
    fn split_thousand_takes_seven_hundred() {
        let labels: Vec<usize> = (0..1000).map(|j| j % 4).collect();
        let ds = toy_dataset(&labels, 4);
        let s = split(&ds, 1).unwrap();
        assert_eq!(s.train.len(), 700);
        assert_eq!(s.test.len(), 300);
    }

    #[test]
    fn split_seeds_differ() {
        let labels: Vec<usize> = (0..40).map(|j| j % 2).collect();
        let ds = toy_dataset(&labels, 2);
        let baseline = split(&ds, 0).unwrap();
        let distinct = (1..=20)
            .filter(|&s| split(&ds, s).unwrap().train != baseline.train)
            .count();
        assert!(distinct >= 19, "only {distinct}/20 seeds differed");
    }

    #[test]
    fn split_rejects_tiny_class() {
        let ds = toy_dataset(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 2], 3);
        assert!(matches!(split(&ds, 0), Err(Error::Data(_))));
    }

    #[test]
    fn split_rejects_fewer_than_ten_samples() {
        let ds = toy_dataset(&[0, 1, 0, 1], 2);
        assert!(matches!(split(&ds, 0), Err(Error::Data(_))));
    }

    #[test]
    fn rejects_nonfinite_matrix() {
        let features = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        let err = Dataset::new(features, vec![0, 1], 2, None, DatasetMeta::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }
}
