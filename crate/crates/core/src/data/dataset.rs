use std::sync::Arc;

use crate::nn::Matrix;

use super::{DataError, DatasetSchema};

/// Feature rows with optional class labels.
///
/// Labeled and unlabeled pools share this type; an unlabeled pool simply has
/// `labels == None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<DatasetSchema>,
    rows: Matrix,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        schema: Arc<DatasetSchema>,
        rows: Matrix,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, DataError> {
        if rows.cols() != schema.num_features() {
            return Err(DataError::Schema(format!(
                "rows have {} columns but schema has {} features",
                rows.cols(),
                schema.num_features()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.rows() {
                return Err(DataError::Schema(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.rows()
                )));
            }
            if let Some((i, &k)) = labels
                .iter()
                .enumerate()
                .find(|(_, &k)| k >= schema.num_classes())
            {
                return Err(DataError::LabelOutOfRange {
                    row: i,
                    label: k,
                    num_classes: schema.num_classes(),
                });
            }
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    pub fn empty(schema: Arc<DatasetSchema>, labeled: bool) -> Self {
        let cols = schema.num_features();
        Self {
            schema,
            rows: Matrix::zeros(0, cols),
            labels: labeled.then(Vec::new),
        }
    }

    pub fn schema(&self) -> &Arc<DatasetSchema> {
        &self.schema
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Labels, or an error naming `what` when the set is unlabeled.
    pub fn require_labels(&self, what: &str) -> Result<&[usize], DataError> {
        self.labels
            .as_deref()
            .ok_or_else(|| DataError::MissingLabels(what.to_string()))
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.schema.num_classes()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Same rows, labels dropped.
    pub fn without_labels(&self) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: self.rows.clone(),
            labels: None,
        }
    }

    pub fn with_rows(&self, rows: Matrix) -> Result<Self, DataError> {
        Self::new(self.schema.clone(), rows, self.labels.clone())
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: self.rows.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Rows per class. Errors on unlabeled sets.
    pub fn class_counts(&self) -> Result<Vec<usize>, DataError> {
        let labels = self.require_labels("class counts")?;
        let mut counts = vec![0; self.num_classes()];
        for &k in labels {
            counts[k] += 1;
        }
        Ok(counts)
    }
}
