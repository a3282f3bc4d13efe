//! Tabular datasets, cross-validation folds and the split space that
//! threshold proposals draw from.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feature matrix plus dense integer labels.
///
/// Features are stored row-major. Labels are always in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    features: Vec<F>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    unique_values: Vec<Vec<F>>,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset from rows. Labels must already be dense; every class
    /// in `0..n_classes` must occur at least once.
    pub fn new(rows: Vec<Vec<F>>, labels: Vec<usize>, feature_names: Vec<String>) -> Result<Self> {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_classes(rows, labels, feature_names, class_names)
    }

    pub fn with_classes(
        rows: Vec<Vec<F>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch(rows.len(), labels.len()));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidDataset("need at least 2 rows".into()));
        }
        let n_features = feature_names.len();
        if n_features == 0 {
            return Err(Error::InvalidDataset("need at least 1 feature".into()));
        }
        let n_classes = class_names.len();
        if n_classes < 2 {
            return Err(Error::InvalidDataset("need at least 2 classes".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumericCell {
                    row: i,
                    column: feature_names[j].clone(),
                    value: row[j].to_string(),
                });
            }
            features.extend_from_slice(row);
        }
        let mut seen = vec![false; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::InvalidDataset(format!("label {y} outside 0..{n_classes}")));
            }
            seen[y] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyClass(c));
        }
        Ok(Self::assemble(features, labels, n_features, n_classes, feature_names, class_names))
    }

    fn assemble(
        features: Vec<F>,
        labels: Vec<usize>,
        n_features: usize,
        n_classes: usize,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Self {
        let n = labels.len();
        let unique_values = (0..n_features)
            .map(|f| {
                let mut col: Vec<F> = (0..n).map(|i| features[i * n_features + f]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).expect("features are finite"));
                col.dedup();
                col
            })
            .collect();
        Self {
            features,
            labels,
            n_features,
            n_classes,
            feature_names,
            class_names,
            unique_values,
        }
    }

    /// Loads a CSV file with a header row, selecting the label column by name.
    pub fn from_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file, label_column)
    }

    /// Parses CSV from any reader. Labels are re-encoded densely: numerically
    /// sorted when every label parses as an integer, lexicographically
    /// otherwise.
    pub fn from_reader<R: Read>(reader: R, label_column: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let label_idx = header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::UnknownLabelColumn(label_column.to_string()))?;
        let feature_names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut features = Vec::new();
        let mut raw_labels = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for (i, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if i == label_idx {
                    raw_labels.push(cell.to_string());
                    continue;
                }
                let value = cell
                    .parse::<F>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumericCell {
                        row,
                        column: header[i].clone(),
                        value: cell.to_string(),
                    })?;
                features.push(value);
            }
        }
        if raw_labels.is_empty() {
            return Err(Error::EmptyDataset);
        }

        let class_names = dense_label_order(&raw_labels);
        let labels: Vec<usize> = raw_labels
            .iter()
            .map(|l| class_names.iter().position(|c| c == l).expect("label collected above"))
            .collect();
        let rows = features
            .chunks(feature_names.len().max(1))
            .map(<[F]>::to_vec)
            .collect();
        Self::with_classes(rows, labels, feature_names, class_names)
    }

    /// Copies the given rows into a new dataset that keeps this dataset's
    /// class coding. Classes may be absent from the subset.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::assemble(
            features,
            labels,
            self.n_features,
            self.n_classes,
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.features.chunks(self.n_features)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Sorted distinct values of `feature`.
    pub fn unique_values(&self, feature: usize) -> &[F] {
        &self.unique_values[feature]
    }

    pub fn unique_count(&self, feature: usize) -> Result<usize> {
        if feature >= self.n_features {
            return Err(Error::FeatureOutOfRange {
                feature,
                n_features: self.n_features,
            });
        }
        Ok(self.unique_values[feature].len())
    }

    pub fn class_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.n_classes];
        for &y in &self.labels {
            hist[y] += 1;
        }
        hist
    }
}

fn dense_label_order(raw: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    let ints: Option<Vec<i64>> = distinct.iter().map(|s| s.parse::<i64>().ok()).collect();
    match ints {
        Some(mut v) => {
            v.sort_unstable();
            v.dedup();
            // keep the original spelling of each label
            v.iter()
                .map(|n| {
                    distinct
                        .iter()
                        .find(|s| s.parse::<i64>().ok() == Some(*n))
                        .expect("parsed from this set")
                        .to_string()
                })
                .collect()
        }
        None => distinct.into_iter().map(str::to_string).collect(),
    }
}

/// One cross-validation fold as index sets into the parent dataset.
/// Unlabelled rows read from CSV, for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<F> {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<F>>,
}

/// Reads a headed CSV of numeric features, dropping `skip_column` if the
/// header has it.
pub fn read_feature_csv<F: Scalar, R: Read>(reader: R, skip_column: Option<&str>) -> Result<FeatureTable<F>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let skip = skip_column.and_then(|c| header.iter().position(|h| h == c));
    let mut rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != skip)
            .map(|(i, cell)| {
                let cell = cell.trim();
                cell.parse::<F>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumericCell {
                        row,
                        column: header[i].clone(),
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<F>>>()?;
        rows.push(values);
    }
    let feature_names = header
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .map(|(_, h)| h)
        .collect();
    Ok(FeatureTable { feature_names, rows })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldSplit {
    pub fn train_set<F: Scalar>(&self, dataset: &Dataset<F>) -> Dataset<F> {
        dataset.select(&self.train)
    }

    pub fn test_set<F: Scalar>(&self, dataset: &Dataset<F>) -> Dataset<F> {
        dataset.select(&self.test)
    }
}

/// Shuffles row indices with a seeded generator and cuts them into `k`
/// contiguous parts whose sizes differ by at most one.
pub fn kfold_split<F: Scalar>(dataset: &Dataset<F>, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    let n = dataset.n_rows();
    check_fold_count(k, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0usize; n];
    let mut start = 0;
    for fold in 0..k {
        let size = n / k + usize::from(fold < n % k);
        for &i in &order[start..start + size] {
            assignment[i] = fold;
        }
        start += size;
    }
    Ok(folds_from_assignment(&assignment, k))
}

/// Like [`kfold_split`] but deals each class's shuffled rows round-robin
/// across folds so that rare classes are spread out.
pub fn stratified_kfold_split<F: Scalar>(
    dataset: &Dataset<F>,
    k: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    let n = dataset.n_rows();
    check_fold_count(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dealt = Vec::with_capacity(n);
    for class in 0..dataset.n_classes() {
        let mut members: Vec<usize> = (0..n).filter(|&i| dataset.labels()[i] == class).collect();
        members.shuffle(&mut rng);
        dealt.extend(members);
    }
    let mut assignment = vec![0usize; n];
    for (pos, &i) in dealt.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(folds_from_assignment(&assignment, k))
}

fn check_fold_count(k: usize, n: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    Ok(())
}

fn folds_from_assignment(assignment: &[usize], k: usize) -> Vec<FoldSplit> {
    (0..k)
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..assignment.len()).partition(|&i| assignment[i] == fold);
            FoldSplit {
                fold_index: fold,
                train,
                test,
            }
        })
        .collect()
}

/// Where split thresholds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdDomain {
    /// Each feature's own distinct training values.
    #[default]
    PerFeature,
    /// One pooled set of distinct values across all features, shared by
    /// every feature.
    Pooled,
}

/// The set of `(feature, threshold)` pairs a split may use.
///
/// Shared by proposals (which draw from it) and the parameter prior (which
/// scores against it), so both always see the same counts.
#[derive(Debug, Clone)]
pub struct SplitSpace<'a, F> {
    dataset: &'a Dataset<F>,
    domain: ThresholdDomain,
    pooled: Vec<F>,
    total_pairs: usize,
}

impl<'a, F: Scalar> SplitSpace<'a, F> {
    pub fn new(dataset: &'a Dataset<F>, domain: ThresholdDomain) -> Self {
        let pooled = match domain {
            ThresholdDomain::PerFeature => Vec::new(),
            ThresholdDomain::Pooled => {
                let mut all: Vec<F> = dataset.unique_values.iter().flatten().copied().collect();
                all.sort_by(|a, b| a.partial_cmp(b).expect("features are finite"));
                all.dedup();
                all
            }
        };
        let mut space = Self {
            dataset,
            domain,
            pooled,
            total_pairs: 0,
        };
        space.total_pairs = (0..dataset.n_features()).map(|f| space.threshold_count(f)).sum();
        space
    }

    pub fn dataset(&self) -> &'a Dataset<F> {
        self.dataset
    }

    pub fn domain(&self) -> ThresholdDomain {
        self.domain
    }

    pub fn n_features(&self) -> usize {
        self.dataset.n_features()
    }

    pub fn thresholds(&self, feature: usize) -> &[F] {
        match self.domain {
            ThresholdDomain::PerFeature => self.dataset.unique_values(feature),
            ThresholdDomain::Pooled => &self.pooled,
        }
    }

    /// The `c` in the `1/c` threshold factor for `feature`.
    pub fn threshold_count(&self, feature: usize) -> usize {
        self.thresholds(feature).len()
    }

    /// Number of distinct `(feature, threshold)` pairs.
    pub fn total_pairs(&self) -> usize {
        self.total_pairs
    }

    /// Maps a flat index in `0..total_pairs()` to its pair.
    pub fn pair_at(&self, mut index: usize) -> (usize, F) {
        for f in 0..self.n_features() {
            let c = self.threshold_count(f);
            if index < c {
                return (f, self.thresholds(f)[index]);
            }
            index -= c;
        }
        panic!("pair index out of range");
    }

    pub fn contains(&self, feature: usize, threshold: F) -> bool {
        feature < self.n_features()
            && self
                .thresholds(feature)
                .binary_search_by(|v| v.partial_cmp(&threshold).expect("finite"))
                .is_ok()
    }

    /// Whether some feature has at least two distinct values.
    pub fn has_informative_split(&self) -> bool {
        (0..self.n_features()).any(|f| self.dataset.unique_values(f).len() >= 2)
    }
}
