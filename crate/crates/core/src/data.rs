//! Tabular datasets with `{-1, +1}` labels, splitting, and label corruption.

use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense row-major feature matrix with binary labels.
///
/// Labels are stored as `i8` and are always exactly `-1` or `+1`. Every row
/// carries a stable identifier that survives splitting and subsetting, so
/// experiment outputs can refer back to the original table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<i8>,
    feature_names: Vec<String>,
    row_ids: Vec<u64>,
}

impl Dataset {
    /// Builds a dataset from rows, assigning row ids `0..n`.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<i8>, feature_names: Vec<String>) -> Result<Self> {
        let row_ids = (0..rows.len() as u64).collect();
        Self::with_row_ids(rows, labels, feature_names, row_ids)
    }

    pub fn with_row_ids(
        rows: Vec<Vec<f64>>,
        labels: Vec<i8>,
        feature_names: Vec<String>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        let d = feature_names.len();
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(features, d, labels, feature_names, row_ids)
    }

    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<i8>,
        feature_names: Vec<String>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        let n = labels.len();
        if feature_names.len() != n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {n_features} features",
                feature_names.len()
            )));
        }
        if features.len() != n * n_features {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} values, expected {n} x {n_features}",
                features.len()
            )));
        }
        if row_ids.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} row ids for {n} rows",
                row_ids.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidLabel(bad as i64));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::InvalidDataset(format!("duplicate row id {dup}")));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            feature_names,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|c| c == name)
    }

    pub fn count_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y > 0).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.count_positive();
        pos > 0 && pos < self.n_rows()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features;
        let mut features = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: d,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Same rows with a replacement label vector.
    pub fn with_labels(&self, labels: Vec<i8>) -> Result<Dataset> {
        if labels.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: labels.len(),
            });
        }
        Dataset::from_flat(
            self.features.clone(),
            self.n_features,
            labels,
            self.feature_names.clone(),
            self.row_ids.clone(),
        )
    }

    /// Appends the rows of `other`; row ids must stay unique.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.n_features != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: other.n_features,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut row_ids = self.row_ids.clone();
        row_ids.extend_from_slice(&other.row_ids);
        Dataset::from_flat(
            features,
            self.n_features,
            labels,
            self.feature_names.clone(),
            row_ids,
        )
    }
}

/// Column typing for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Columns to one-hot encode. When `None`, a column is treated as
    /// categorical if any of its cells fails to parse as a number; when
    /// `Some`, every other column is declared numeric and a non-numeric cell
    /// is an error.
    pub categorical: Option<Vec<String>>,
}

/// Loads a headered, comma-delimited CSV file.
///
/// The label cell maps to `+1` when it equals `positive_value` (after
/// trimming) and to `-1` otherwise. Categorical columns are replaced in place
/// by one indicator column per distinct value, named `column=value`, with
/// values in lexicographic order.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_value: &str,
    options: &CsvOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column, positive_value, options)
}

pub fn read_csv<R: Read>(
    reader: R,
    label_column: &str,
    positive_value: &str,
    options: &CsvOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    if let Some(cats) = &options.categorical {
        if let Some(missing) = cats.iter().find(|c| !headers.contains(c)) {
            return Err(Error::MissingColumn(missing.clone()));
        }
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        cells.push(record.iter().map(str::to_string).collect());
    }
    if cells.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let labels: Vec<i8> = cells
        .iter()
        .map(|row| if row[label_idx] == positive_value { 1 } else { -1 })
        .collect();

    // Decide each feature column's encoding.
    enum Encoding {
        Numeric,
        OneHot(Vec<String>),
    }
    let mut encodings = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == label_idx {
            continue;
        }
        let categorical = match &options.categorical {
            Some(cats) => cats.contains(name),
            None => cells
                .iter()
                .any(|row| !row[c].is_empty() && row[c].parse::<f64>().is_err()),
        };
        let encoding = if categorical {
            let values: BTreeSet<&str> = cells.iter().map(|row| row[c].as_str()).collect();
            Encoding::OneHot(values.into_iter().map(str::to_string).collect())
        } else {
            Encoding::Numeric
        };
        encodings.push((c, name, encoding));
    }

    let mut feature_names = Vec::new();
    for (_, name, enc) in &encodings {
        match enc {
            Encoding::Numeric => feature_names.push((*name).clone()),
            Encoding::OneHot(values) => {
                feature_names.extend(values.iter().map(|v| format!("{name}={v}")))
            }
        }
    }

    let d = feature_names.len();
    let mut features = Vec::with_capacity(cells.len() * d);
    for (r, row) in cells.iter().enumerate() {
        for (c, name, enc) in &encodings {
            let cell = row[*c].as_str();
            if cell.is_empty() {
                return Err(Error::BadCell {
                    row: r,
                    column: (*name).clone(),
                    reason: "missing value".into(),
                });
            }
            match enc {
                Encoding::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                        row: r,
                        column: (*name).clone(),
                        reason: format!("`{cell}` is not numeric"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::BadCell {
                            row: r,
                            column: (*name).clone(),
                            reason: format!("`{cell}` is not finite"),
                        });
                    }
                    features.push(v);
                }
                Encoding::OneHot(values) => {
                    features.extend(values.iter().map(|v| if v == cell { 1.0 } else { 0.0 }));
                }
            }
        }
    }
    let row_ids = (0..cells.len() as u64).collect();
    Dataset::from_flat(features, d, labels, feature_names, row_ids)
}

/// Seeded random train/test partition.
///
/// The test side receives `round(test_fraction * n)` rows, clamped so both
/// sides are nonempty. Each side keeps the input's relative row order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::OutOfRange {
            name: "test_fraction",
            value: test_fraction,
            expected: "0 < f < 1",
        });
    }
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "cannot split {n} rows into two nonempty parts"
        )));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_test[i]);
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}

/// Which rows of a dataset had their label negated, and how they were chosen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionRecord {
    #[serde(skip)]
    pub flipped_mask: Vec<bool>,
    pub seed: u64,
    pub fraction: f64,
    pub flipped_row_ids: Vec<u64>,
}

impl CorruptionRecord {
    pub fn n_flipped(&self) -> usize {
        self.flipped_mask.iter().filter(|&&f| f).count()
    }

    /// Negates the masked labels of `data`. Applying a record to the
    /// dataset it produced restores the original labels.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if self.flipped_mask.len() != data.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: data.n_rows(),
                got: self.flipped_mask.len(),
            });
        }
        let labels = data
            .labels()
            .iter()
            .zip(&self.flipped_mask)
            .map(|(&y, &f)| if f { -y } else { y })
            .collect();
        data.with_labels(labels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Negates exactly `round(fraction * n)` labels chosen uniformly without
/// replacement (prefix of a seeded Fisher-Yates shuffle).
pub fn flip_labels(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, CorruptionRecord)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange {
            name: "fraction",
            value: fraction,
            expected: "0 <= f <= 1",
        });
    }
    let n = data.n_rows();
    let count = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let (chosen, _) = order.partial_shuffle(&mut seeded_rng(seed), count);
    let mut mask = vec![false; n];
    for &i in chosen.iter() {
        mask[i] = true;
    }
    let record = CorruptionRecord {
        flipped_row_ids: mask_to_ids(&mask, data.row_ids()),
        flipped_mask: mask,
        seed,
        fraction,
    };
    let corrupted = record.apply(data)?;
    Ok((corrupted, record))
}

fn mask_to_ids(mask: &[bool], ids: &[u64]) -> Vec<u64> {
    mask.iter()
        .zip(ids)
        .filter(|(&f, _)| f)
        .map(|(_, &id)| id)
        .collect()
}

/// Creates a labeling mismatch inside a subgroup.
///
/// The subgroup is every row whose `predicate_column` value is below
/// `threshold`. A seeded sample of `keep` subgroup rows is retained (the rest
/// are dropped) and the labels of `flip` of the retained rows are negated.
/// Rows outside the subgroup are untouched and row order is preserved. The
/// returned record's mask refers to rows of the returned dataset, and its
/// fraction is `flip / n_out`.
pub fn inject_domain_mismatch(
    data: &Dataset,
    predicate_column: &str,
    threshold: f64,
    keep: usize,
    flip: usize,
    seed: u64,
) -> Result<(Dataset, CorruptionRecord)> {
    let col = data
        .column_index(predicate_column)
        .ok_or_else(|| Error::MissingColumn(predicate_column.to_string()))?;
    if flip > keep {
        return Err(Error::Invalid(format!(
            "cannot flip {flip} labels when keeping only {keep} subgroup rows"
        )));
    }
    let subgroup: Vec<usize> = (0..data.n_rows())
        .filter(|&i| data.value(i, col) < threshold)
        .collect();
    if subgroup.len() < keep {
        return Err(Error::Invalid(format!(
            "subgroup `{predicate_column}` < {threshold} has {} rows, fewer than keep = {keep}",
            subgroup.len()
        )));
    }

    let mut rng = seeded_rng(seed);
    let mut pool = subgroup.clone();
    let (kept, _) = pool.partial_shuffle(&mut rng, keep);
    let mut kept = kept.to_vec();
    let (flipped, _) = kept.partial_shuffle(&mut rng, flip);

    let mut in_subgroup = vec![false; data.n_rows()];
    let mut retained = vec![true; data.n_rows()];
    for &i in &subgroup {
        in_subgroup[i] = true;
        retained[i] = false;
    }
    let mut to_flip = vec![false; data.n_rows()];
    for &i in flipped.iter() {
        to_flip[i] = true;
    }
    for &i in &kept {
        retained[i] = true;
    }

    let keep_idx: Vec<usize> = (0..data.n_rows()).filter(|&i| retained[i]).collect();
    let out = data.subset(&keep_idx);
    let mask: Vec<bool> = keep_idx.iter().map(|&i| to_flip[i]).collect();
    let record = CorruptionRecord {
        flipped_row_ids: mask_to_ids(&mask, out.row_ids()),
        flipped_mask: mask,
        seed,
        fraction: if out.is_empty() {
            0.0
        } else {
            flip as f64 / out.n_rows() as f64
        },
    };
    let out = record.apply(&out)?;
    Ok((out, record))
}
