use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

/// Below this population standard deviation a feature counts as constant.
pub const CONSTANT_STD: f64 = 1e-12;

/// Per-feature z-scoring fitted on one dataset.
///
/// Uses the population (1/n) standard deviation. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits on the rows of `train`. Labels are never read.
    pub fn fit(train: &Dataset) -> Result<Self, DataError> {
        if train.is_empty() {
            return Err(DataError::Empty("normalizer fit input".into()));
        }
        let rows = train.rows();
        let n = rows.rows() as f64;
        let mean: Vec<f64> = rows.column_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![0.0; rows.cols()];
        for row in rows.iter_rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.std[feature] < CONSTANT_STD
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = if self.is_constant(j) {
                0.0
            } else {
                (*x - self.mean[j]) / self.std[j]
            };
        }
    }

    /// `z = (x − mean) / std`, applied to every row of `ds`. Not idempotent.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset, DataError> {
        if ds.rows().cols() != self.mean.len() {
            return Err(DataError::Schema(format!(
                "normalizer fitted on {} features, dataset has {}",
                self.mean.len(),
                ds.rows().cols()
            )));
        }
        let mut rows = ds.rows().clone();
        for r in 0..rows.rows() {
            self.transform_row(rows.row_mut(r));
        }
        ds.with_rows(rows)
    }
}

pub fn fit_normalizer(train_labeled: &Dataset) -> Result<Normalizer, DataError> {
    Normalizer::fit(train_labeled)
}
