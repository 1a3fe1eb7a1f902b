//! Tabular datasets: validation, CSV loading and categorical encoding.
//!
//! Categorical text columns are integer-encoded in order of first
//! appearance and later split by thresholds on the codes, so a column with
//! more categories offers more candidate thresholds. Missing values (empty
//! field or `NA`) are handled by dropping the row.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column value domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    Continuous,
    /// Number of distinct values observed in the column.
    Categorical(usize),
}

/// Numeric feature matrix with labels and per-column metadata.
///
/// Features are stored row-major. Labels are class indices in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    p: usize,
    arity: Vec<Arity>,
    labels: Vec<usize>,
    n_classes: usize,
    column_names: Vec<String>,
    /// Decoding table for integer-encoded text columns.
    categories: Vec<Option<Vec<String>>>,
}

/// Bookkeeping returned alongside a loaded dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadSummary {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

impl Dataset {
    /// Build a dataset from rows, validating every invariant.
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        column_names: Vec<String>,
        arity: Vec<Arity>,
    ) -> Result<Self> {
        let p = column_names.len();
        let n = rows.len();
        let mut features = Vec::with_capacity(n * p);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            features.extend(row);
        }
        let categories = vec![None; p];
        Self::from_parts(features, n, labels, n_classes, column_names, arity, categories)
    }

    fn from_parts(
        features: Vec<f64>,
        n: usize,
        labels: Vec<usize>,
        n_classes: usize,
        column_names: Vec<String>,
        arity: Vec<Arity>,
        categories: Vec<Option<Vec<String>>>,
    ) -> Result<Self> {
        let p = column_names.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if p == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} outside 0..{n_classes}"
            )));
        }
        if arity.len() != p || categories.len() != p {
            return Err(Error::InvalidDataset(
                "metadata length does not match column count".into(),
            ));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite value {v}")));
        }
        let ds = Dataset {
            features,
            n,
            p,
            arity,
            labels,
            n_classes,
            column_names,
            categories,
        };
        for j in 0..p {
            if let Arity::Categorical(k) = ds.arity[j] {
                let observed = ds.distinct_count(j);
                if observed != k {
                    return Err(Error::InvalidDataset(format!(
                        "column `{}` declares {k} categories but has {observed}",
                        ds.column_names[j]
                    )));
                }
            }
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.p + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, j)).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn arity(&self) -> &[Arity] {
        &self.arity
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Original text for an encoded category, if column `j` was text.
    pub fn decode(&self, j: usize, code: f64) -> Option<&str> {
        let table = self.categories.get(j)?.as_ref()?;
        if code < 0.0 || code.fract() != 0.0 {
            return None;
        }
        table.get(code as usize).map(String::as_str)
    }

    pub fn require_binary(&self) -> Result<()> {
        if self.n_classes != 2 {
            return Err(Error::NonBinaryLabels {
                n_classes: self.n_classes,
            });
        }
        Ok(())
    }

    /// Class-1 indicator for every row (binary datasets).
    pub fn binary_labels(&self) -> Result<Vec<f64>> {
        self.require_binary()?;
        Ok(self.labels.iter().map(|&y| y as f64).collect())
    }

    fn distinct_count(&self, j: usize) -> usize {
        let mut col = self.column(j);
        col.sort_by(f64::total_cmp);
        col.dedup();
        col.len()
    }

    /// Copy of the dataset with column `j` randomly permuted across rows.
    pub fn with_shuffled_column<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Dataset {
        let mut col = self.column(j);
        col.shuffle(rng);
        let mut out = self.clone();
        for (i, v) in col.into_iter().enumerate() {
            out.features[i * self.p + j] = v;
        }
        out
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

/// Encodes a text column by order of first appearance.
#[derive(Default)]
struct Encoder {
    codes: HashMap<String, usize>,
    table: Vec<String>,
}

impl Encoder {
    fn code(&mut self, s: &str) -> usize {
        if let Some(&c) = self.codes.get(s) {
            return c;
        }
        let c = self.table.len();
        self.codes.insert(s.to_owned(), c);
        self.table.push(s.to_owned());
        c
    }
}

/// Column names of a CSV file's header row.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    Ok(reader.headers()?.iter().map(str::to_owned).collect())
}

/// Load a CSV file with a header row.
///
/// Rows with a missing value in any selected column are dropped and counted.
/// A feature column whose every kept value parses as a number stays numeric
/// (continuous); otherwise it is encoded as categories. The label column is
/// used as-is when it holds non-negative integers, otherwise encoded.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    feature_columns: &[&str],
) -> Result<(Dataset, LoadSummary)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let label_idx = find(label_column)?;
    let feature_idx = feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = LoadSummary::default();
    let mut kept_labels: Vec<String> = Vec::new();
    let mut kept_features: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        summary.rows_read += 1;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        let label = get(label_idx);
        if is_missing(label) || feature_idx.iter().any(|&j| is_missing(get(j))) {
            summary.rows_dropped += 1;
            continue;
        }
        kept_labels.push(label.to_owned());
        kept_features.push(feature_idx.iter().map(|&j| get(j).to_owned()).collect());
    }
    if kept_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if summary.rows_dropped > 0 {
        log::info!(
            "{}: dropped {} of {} rows with missing values",
            path.display(),
            summary.rows_dropped,
            summary.rows_read
        );
    }

    let n = kept_labels.len();
    let p = feature_idx.len();
    let mut features = vec![0.0; n * p];
    let mut arity = Vec::with_capacity(p);
    let mut categories = Vec::with_capacity(p);
    for j in 0..p {
        let parsed: Option<Vec<f64>> = kept_features
            .iter()
            .map(|row| row[j].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(values) => {
                for (i, v) in values.into_iter().enumerate() {
                    features[i * p + j] = v;
                }
                arity.push(Arity::Continuous);
                categories.push(None);
            }
            None => {
                let mut enc = Encoder::default();
                for (i, row) in kept_features.iter().enumerate() {
                    features[i * p + j] = enc.code(&row[j]) as f64;
                }
                arity.push(Arity::Categorical(enc.table.len()));
                categories.push(Some(enc.table));
            }
        }
    }

    let numeric: Option<Vec<usize>> = kept_labels.iter().map(|s| s.parse().ok()).collect();
    let labels = match numeric {
        Some(v) => v,
        None => {
            let mut enc = Encoder::default();
            kept_labels.iter().map(|s| enc.code(s)).collect()
        }
    };
    let n_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));

    let ds = Dataset::from_parts(
        features,
        n,
        labels,
        n_classes,
        feature_columns.iter().map(|s| s.to_string()).collect(),
        arity,
        categories,
    )?;
    Ok((ds, summary))
}

pub const TITANIC_FEATURES: [&str; 4] = ["PassengerId", "Age", "Sex", "Pclass"];
pub const TITANIC_LABEL: &str = "Survived";

/// Load the Kaggle Titanic training file: features PassengerId, Age, Sex and
/// Pclass, label Survived, rows with missing Age excluded.
pub fn load_titanic(path: impl AsRef<Path>) -> Result<(Dataset, LoadSummary)> {
    let (ds, summary) = load_csv(path, TITANIC_LABEL, &TITANIC_FEATURES).map_err(|e| match e {
        Error::MissingColumn(c) => Error::Schema(format!("Titanic file lacks column `{c}`")),
        other => other,
    })?;
    ds.require_binary()
        .map_err(|_| Error::Schema("Survived must be 0/1".into()))?;
    if ds.arity()[2] != Arity::Categorical(2) {
        return Err(Error::Schema("Sex must have exactly two text values".into()));
    }
    Ok((ds, summary))
}
