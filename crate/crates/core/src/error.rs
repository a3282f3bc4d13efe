use std::path::PathBuf;

use thiserror::Error;

use crate::moves::MoveKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("label column `{0}` not found in header")]
    UnknownLabelColumn(String),

    #[error("non-numeric feature cell {value:?} at data row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("class {0} has no rows")]
    EmptyClass(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("feature {feature} out of range (dataset has {n_features})")]
    FeatureOutOfRange { feature: usize, n_features: usize },

    #[error("fold count {k} invalid for {n} rows (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("every feature is constant; no split can be made")]
    NoSplittableFeature,

    #[error("invalid edit: {0}")]
    InvalidEdit(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("target tree is not reachable by one {0:?} move")]
    Unreachable(MoveKind),

    #[error("no move kind with positive probability is feasible on this tree")]
    NoFeasibleMove,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample list is empty")]
    NoSamples,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("both samples have zero variance")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("feature count mismatch: expected {expected}, got {got}")]
    FeatureCountMismatch { expected: usize, got: usize },

    #[error("unsupported schema tag {found:?} (expected {expected:?})")]
    Schema { found: String, expected: String },
}

pub type Result<T> = std::result::Result<T, Error>;
