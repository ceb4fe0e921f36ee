//! Phase I: the plain rating model.
//!
//! A supervised classifier is trained on the labeled pool only and then used
//! to assign a pseudo-label to every unlabeled row. Two model families are
//! provided: multinomial logistic regression and softmax gradient boosting
//! (the default).

mod gbdt;
mod logreg;
mod pseudo;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::nn::{Matrix, NnError};

pub use gbdt::{train_gbdt, GbdtConfig, GbdtModel};
pub use logreg::{logreg_loss_and_grad, train_logreg, LogregConfig, LogregModel};
pub use pseudo::{pseudo_label, PseudoLabeledDataset};
pub use tree::{fit_regression_tree, Node, RegressionTree};

#[derive(Debug, Error)]
pub enum PrmError {
    #[error("{0} is empty")]
    Empty(String),
    #[error("row {row}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("boosting round {round} raised training log-loss from {before} to {after}")]
    LossIncreased { round: usize, before: f64, after: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub(crate) fn check_labels(ds: &Dataset) -> Result<&[usize], PrmError> {
    if ds.is_empty() {
        return Err(PrmError::Empty("labeled training set".into()));
    }
    let labels = ds.require_labels("plain model training set")?;
    let m = ds.num_classes();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &k)| k >= m) {
        return Err(PrmError::LabelOutOfRange {
            row,
            label,
            num_classes: m,
        });
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrmVariant {
    LogisticRegression,
    #[default]
    Gbdt,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrmConfig {
    pub variant: PrmVariant,
    pub gbdt: GbdtConfig,
    pub logreg: LogregConfig,
    /// Drop pseudo-labels whose confidence falls below this. Off by default.
    pub min_confidence: Option<f64>,
}

/// A trained Phase I classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PlainModel {
    LogisticRegression(LogregModel),
    Gbdt(GbdtModel),
}

impl PlainModel {
    pub fn num_features(&self) -> usize {
        match self {
            PlainModel::LogisticRegression(m) => m.layer.in_dim(),
            PlainModel::Gbdt(m) => m.num_features,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            PlainModel::LogisticRegression(m) => m.layer.out_dim(),
            PlainModel::Gbdt(m) => m.num_classes,
        }
    }

    pub fn variant(&self) -> PrmVariant {
        match self {
            PlainModel::LogisticRegression(_) => PrmVariant::LogisticRegression,
            PlainModel::Gbdt(_) => PrmVariant::Gbdt,
        }
    }

    /// Class probabilities for one feature vector.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, PrmError> {
        if x.len() != self.num_features() {
            return Err(PrmError::Dimension(format!(
                "model expects {} features, got {}",
                self.num_features(),
                x.len()
            )));
        }
        Ok(match self {
            PlainModel::LogisticRegression(m) => m.predict_proba(x),
            PlainModel::Gbdt(m) => m.predict_proba(x),
        })
    }

    /// Row-wise [`PlainModel::predict_proba`].
    pub fn predict_proba_batch(&self, x: &Matrix) -> Result<Matrix, PrmError> {
        let mut out = Matrix::zeros(x.rows(), self.num_classes());
        for r in 0..x.rows() {
            let p = self.predict_proba(x.row(r))?;
            out.row_mut(r).copy_from_slice(&p);
        }
        Ok(out)
    }

    pub fn predict_labels(&self, x: &Matrix) -> Result<Vec<usize>, PrmError> {
        let probs = self.predict_proba_batch(x)?;
        Ok(probs.iter_rows().map(crate::nn::argmax).collect())
    }
}

/// Trains the configured variant on the labeled pool.
pub fn train_prm(labeled: &Dataset, cfg: &PrmConfig) -> Result<PlainModel, PrmError> {
    Ok(match cfg.variant {
        PrmVariant::Gbdt => PlainModel::Gbdt(train_gbdt(labeled, &cfg.gbdt)?),
        PrmVariant::LogisticRegression => {
            PlainModel::LogisticRegression(train_logreg(labeled, &cfg.logreg)?)
        }
    })
}
