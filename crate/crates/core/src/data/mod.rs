//! Tabular data: schema, CSV ingestion, z-scoring, stratified splits and a
//! synthetic generator with the shape of the corporate rating task.

mod csv_io;
mod dataset;
mod normalize;
mod schema;
mod split;
mod synth;

use thiserror::Error;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv, MissingPolicy};
pub use dataset::Dataset;
pub use normalize::{fit_normalizer, Normalizer, CONSTANT_STD};
pub use schema::{DatasetSchema, DEFAULT_FEATURE_GROUPS, DEFAULT_RATING_LABELS, LABEL_COLUMN};
pub use split::{largest_remainder, stratified_split, SplitFractions};
pub use synth::{corrupt_labels, generate_synthetic, MeanDirections, SynthConfig, SyntheticData};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("row {row}: found {found} fields, expected {expected}")]
    Arity {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("missing or non-numeric feature values in rows {rows:?}")]
    MissingValues { rows: Vec<usize> },
    #[error("row {row}: unknown label {value:?}")]
    UnknownLabel { row: usize, value: String },
    #[error("row {row}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{0} is unlabeled")]
    MissingLabels(String),
    #[error("{0} is empty")]
    Empty(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
