use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column `{column}` at data row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("fewer than 2 classes (found {0})")]
    TooFewClasses(usize),

    #[error("{0} classes exceed the supported maximum of 64")]
    TooManyClasses(usize),

    #[error("label {0:?} is not one of the model's classes")]
    UnknownLabel(String),

    #[error("label index {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("class `{0}` has no examples in the training data")]
    ClassAbsent(String),

    #[error("column `{0}` has no observed values in the training data")]
    ColumnAllMissing(String),

    #[error("split counts sum to {requested} but the dataset has {available} rows")]
    SplitMismatch { requested: usize, available: usize },

    #[error("{0} split must contain at least one row")]
    EmptySplit(&'static str),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dataset already has an intercept column")]
    InterceptPresent,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("loss {0} must be positive for the {1} transform")]
    NonPositiveLoss(f64, &'static str),

    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: String },

    #[error("every grid cell diverged")]
    AllDiverged,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, value: impl ToString) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
        }
    }
}
