//! Confusion matrices, precision/recall/F1 reports and multi-seed aggregation.

mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    aggregate_runs, classification_report, AggregateReport, ClassMetrics, MeanStd, MetricsReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("aggregation needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("reports disagree on the class set")]
    SchemaMismatch,
}

/// `counts[i][j]` = rows of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let m = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != m) {
            return Err(EvalError::ClassOutOfRange {
                class: row.len(),
                num_classes: m,
            });
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.counts[k][k]).sum()
    }

    /// Row sums: how many rows truly belong to each class.
    pub fn support(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Column sums: how often each class was predicted.
    pub fn predicted(&self) -> Vec<u64> {
        (0..self.num_classes())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for class in [t, p] {
            if class >= num_classes {
                return Err(EvalError::ClassOutOfRange { class, num_classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counts() {
        let cm = confusion_matrix(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 2], 3).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert_eq!(cm.total(), 5);
        assert_eq!(cm.trace(), 4);
    }

    #[test]
    fn perfect_is_diagonal() {
        let y = [2, 0, 1, 1, 0];
        let cm = confusion_matrix(&y, &y, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cm.get(i, j), 0);
                }
            }
        }
        assert_eq!(cm.trace(), 5);
    }

    #[test]
    fn empty_and_errors() {
        let cm = confusion_matrix(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert_eq!(cm.num_classes(), 4);
        assert!(matches!(
            confusion_matrix(&[0], &[], 2),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion_matrix(&[0], &[2], 2),
            Err(EvalError::ClassOutOfRange { class: 2, .. })
        ));
    }
}
