use std::sync::Arc;

use crate::data::{Dataset, DatasetSchema};
use crate::nn::{argmax, Matrix};

use super::{PlainModel, PrmError};

/// Unlabeled rows with labels and confidences assigned by a plain model.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledDataset {
    schema: Arc<DatasetSchema>,
    rows: Matrix,
    labels: Vec<usize>,
    confidences: Vec<f64>,
}

impl PseudoLabeledDataset {
    pub fn new(
        schema: Arc<DatasetSchema>,
        rows: Matrix,
        labels: Vec<usize>,
        confidences: Vec<f64>,
    ) -> Result<Self, PrmError> {
        if labels.len() != rows.rows() || confidences.len() != rows.rows() {
            return Err(PrmError::Dimension(format!(
                "{} rows, {} labels, {} confidences",
                rows.rows(),
                labels.len(),
                confidences.len()
            )));
        }
        let m = schema.num_classes();
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &k)| k >= m) {
            return Err(PrmError::LabelOutOfRange {
                row,
                label,
                num_classes: m,
            });
        }
        Ok(Self {
            schema,
            rows,
            labels,
            confidences,
        })
    }

    pub fn schema(&self) -> &Arc<DatasetSchema> {
        &self.schema
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps rows with confidence at or above `threshold`, in order.
    pub fn filter_min_confidence(&self, threshold: f64) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.confidences[i] >= threshold)
            .collect();
        Self {
            schema: self.schema.clone(),
            rows: self.rows.select_rows(&keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            confidences: keep.iter().map(|&i| self.confidences[i]).collect(),
        }
    }

    /// Views the pseudo-labels as an ordinary labeled dataset.
    pub fn to_dataset(&self) -> Dataset {
        Dataset::new(self.schema.clone(), self.rows.clone(), Some(self.labels.clone()))
            .expect("validated on construction")
    }
}

/// Labels each unlabeled row with the model's most probable class (lowest
/// index on ties) and records that probability as its confidence.
pub fn pseudo_label(model: &PlainModel, unlabeled: &Dataset) -> Result<PseudoLabeledDataset, PrmError> {
    let rows = unlabeled.rows();
    let mut labels = Vec::with_capacity(rows.rows());
    let mut confidences = Vec::with_capacity(rows.rows());
    for row in rows.iter_rows() {
        let p = model.predict_proba(row)?;
        let k = argmax(&p);
        labels.push(k);
        confidences.push(p[k]);
    }
    PseudoLabeledDataset::new(unlabeled.schema().clone(), rows.clone(), labels, confidences)
}
