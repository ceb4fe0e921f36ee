use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DataError;

/// Feature groups of the default corporate-profile schema, with how many
/// placeholder features each contributes (39 in total).
pub const DEFAULT_FEATURE_GROUPS: [(&str, usize); 6] = [
    ("profit_capability", 7),
    ("operation_capability", 7),
    ("growth_capability", 7),
    ("repayment_capability", 6),
    ("cash_flow_capability", 6),
    ("dupont_identity", 6),
];

pub const DEFAULT_RATING_LABELS: [&str; 9] = ["AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "CC", "C"];

/// Name of the optional label column in CSV files.
pub const LABEL_COLUMN: &str = "rating";

/// Column names and class names of a tabular rating dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    feature_names: Vec<String>,
    label_names: Vec<String>,
}

impl DatasetSchema {
    pub fn new(feature_names: Vec<String>, label_names: Vec<String>) -> Result<Self, DataError> {
        if label_names.len() < 2 {
            return Err(DataError::Schema(format!(
                "need at least two classes, got {}",
                label_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for f in &feature_names {
            if f == LABEL_COLUMN {
                return Err(DataError::Schema(format!(
                    "feature name {f:?} is reserved for the label column"
                )));
            }
            if !seen.insert(f.as_str()) {
                return Err(DataError::Schema(format!("duplicate feature name {f:?}")));
            }
        }
        let mut seen = HashSet::new();
        for l in &label_names {
            if !seen.insert(l.as_str()) {
                return Err(DataError::Schema(format!("duplicate label name {l:?}")));
            }
        }
        Ok(Self {
            feature_names,
            label_names,
        })
    }

    /// `f00…` feature names and `class_0…` labels.
    pub fn generic(num_features: usize, num_classes: usize) -> Result<Self, DataError> {
        Self::new(
            (0..num_features).map(|i| format!("f{i:02}")).collect(),
            (0..num_classes).map(|k| format!("class_{k}")).collect(),
        )
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Resolves a label cell: a class name, or failing that an integer index.
    pub fn parse_label(&self, raw: &str) -> Option<usize> {
        let raw = raw.trim();
        if let Some(k) = self.label_names.iter().position(|l| l == raw) {
            return Some(k);
        }
        raw.parse::<usize>().ok().filter(|&k| k < self.num_classes())
    }

    /// Hex SHA-256 over feature and label names, used to refuse loading a
    /// model against data with a different layout.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.feature_names {
            h.update(f.as_bytes());
            h.update([0u8]);
        }
        h.update([1u8]);
        for l in &self.label_names {
            h.update(l.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

impl Default for DatasetSchema {
    fn default() -> Self {
        let features = DEFAULT_FEATURE_GROUPS
            .iter()
            .flat_map(|(group, n)| (1..=*n).map(move |i| format!("{group}_{i:02}")))
            .collect();
        let labels = DEFAULT_RATING_LABELS.iter().map(|s| s.to_string()).collect();
        Self::new(features, labels).expect("default schema is valid")
    }
}
