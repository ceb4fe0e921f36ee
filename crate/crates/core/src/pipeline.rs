//! End-to-end steps shared by the CLI and the experiment tests: split,
//! normalize, Phase I, pseudo-labeling, Phase II, evaluation.

use thiserror::Error;

use crate::assl::{self, AsslConfig, AsslError, AsslModel, TrainHistory};
use crate::data::{stratified_split, DataError, Dataset, Normalizer, SplitFractions};
use crate::eval::{classification_report, confusion_matrix, EvalError, MetricsReport};
use crate::nn::{argmax, Matrix};
use crate::prm::{pseudo_label, train_prm, PlainModel, PrmConfig, PrmError, PseudoLabeledDataset};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Prm(#[from] PrmError),
    #[error(transparent)]
    Assl(#[from] AsslError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One seed's split, with z-scored copies of every part.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub normalizer: Normalizer,
    pub train_z: Dataset,
    pub val_z: Dataset,
    pub test_z: Dataset,
    pub unlabeled_z: Dataset,
}

/// Splits `labeled` and fits the normalizer on the training part only.
pub fn prepare_split(
    labeled: &Dataset,
    unlabeled: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<PreparedSplit, PipelineError> {
    let (train, val, test) = stratified_split(labeled, fractions, seed)?;
    let normalizer = Normalizer::fit(&train.without_labels())?;
    Ok(PreparedSplit {
        train_z: normalizer.apply(&train)?,
        val_z: normalizer.apply(&val)?,
        test_z: normalizer.apply(&test)?,
        unlabeled_z: normalizer.apply(&unlabeled.without_labels())?,
        train,
        val,
        test,
        normalizer,
    })
}

/// Phase I: fit the plain model on the training split and pseudo-label the pool.
pub fn phase_one(split: &PreparedSplit, cfg: &PrmConfig) -> Result<(PlainModel, PseudoLabeledDataset), PipelineError> {
    let model = train_prm(&split.train_z, cfg)?;
    let mut pseudo = pseudo_label(&model, &split.unlabeled_z)?;
    if let Some(t) = cfg.min_confidence {
        pseudo = pseudo.filter_min_confidence(t);
    }
    Ok((model, pseudo))
}

/// Phase II on a prepared split.
pub fn phase_two(
    split: &PreparedSplit,
    pseudo: &PseudoLabeledDataset,
    cfg: &AsslConfig,
) -> Result<(AsslModel, TrainHistory), PipelineError> {
    Ok(assl::train(&split.train_z, pseudo, &split.val_z, cfg)?)
}

/// Metrics of argmax predictions from `probs` against `truth`.
pub fn evaluate(probs: &Matrix, truth: &[usize]) -> Result<MetricsReport, PipelineError> {
    let pred: Vec<usize> = probs.iter_rows().map(argmax).collect();
    let cm = confusion_matrix(truth, &pred, probs.cols())?;
    Ok(classification_report(&cm)?)
}

/// Test-split report of a trained Phase II model.
pub fn evaluate_assl(model: &AsslModel, cfg: &AsslConfig, split: &PreparedSplit) -> Result<(Matrix, MetricsReport), PipelineError> {
    let probs = model.predict_proba(split.test_z.rows(), cfg.inference_head)?;
    let truth = split.test_z.require_labels("test split")?;
    let report = evaluate(&probs, truth)?;
    Ok((probs, report))
}

/// Test-split report of a plain model.
pub fn evaluate_plain(model: &PlainModel, split: &PreparedSplit) -> Result<(Matrix, MetricsReport), PipelineError> {
    let probs = model.predict_proba_batch(split.test_z.rows())?;
    let truth = split.test_z.require_labels("test split")?;
    let report = evaluate(&probs, truth)?;
    Ok((probs, report))
}
