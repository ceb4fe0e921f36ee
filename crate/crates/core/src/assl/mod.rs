//! Phase II: adversarial semi-supervised training.
//!
//! A shared encoder maps labeled and pseudo-labeled rows into one embedding
//! space. A supervised head learns from true labels, a semi-supervised head
//! from pseudo-labels, and a discriminator tries to tell the two kinds of
//! embedding apart while the encoder is trained to make that impossible.

mod loss;
mod model;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::nn::NnError;

pub use loss::{
    adversarial_log_likelihood, class_loss_and_logit_grad, loss_adversarial, loss_bce_l2,
    ClassLoss, PROB_FLOOR,
};
pub use model::{classify, encode, AsslModel, InferenceHead};
pub use trainer::{
    discriminator_loss_and_grad, generator_loss_and_grads, train, train_observed, AsslTrainer,
    BatchCycler, DiscriminatorStats, EpochRecord, GeneratorGrads, GeneratorLosses, TrainHistory,
};

#[derive(Debug, Error)]
pub enum AsslError {
    #[error("{0} is empty")]
    Empty(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("row {row}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("non-finite {term} at epoch {epoch}, step {step}")]
    NonFinite {
        term: &'static str,
        epoch: usize,
        step: usize,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Phase II hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsslConfig {
    /// Embedding dimension `d`.
    pub embedding_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// L2 weight on the supervised head.
    pub lambda_l: f64,
    /// L2 weight on the semi-supervised head.
    pub lambda_u: f64,
    /// L2 weight on the discriminator.
    pub lambda_adv: f64,
    /// L2 weight on the encoder.
    pub encoder_decay: f64,
    /// Weight of the adversarial term in the generator loss.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub disc_learning_rate: f64,
    /// Discriminator updates per generator update.
    pub disc_steps: usize,
    pub seed: u64,
    pub inference_head: InferenceHead,
    pub loss: ClassLoss,
    /// When false, pseudo-labeled batches are never drawn: no semi-supervised
    /// term, no adversarial term and no discriminator updates.
    pub use_pseudo: bool,
    /// When false, the discriminator is never evaluated or updated.
    pub use_discriminator: bool,
    /// When false, the semi-supervised head is neither trained nor part of
    /// the loss; pseudo batches still reach the encoder through the
    /// adversarial term.
    pub semi_loss: bool,
}

impl Default for AsslConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 32,
            encoder_hidden: vec![64],
            head_hidden: vec![64],
            discriminator_hidden: vec![64],
            lambda_l: 1e-4,
            lambda_u: 1e-4,
            lambda_adv: 1e-4,
            encoder_decay: 0.0,
            alpha: 0.1,
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            disc_learning_rate: 1e-3,
            disc_steps: 1,
            seed: 0,
            inference_head: InferenceHead::Supervised,
            loss: ClassLoss::PerClassBce,
            use_pseudo: true,
            use_discriminator: true,
            semi_loss: true,
        }
    }
}

impl AsslConfig {
    pub fn validate(&self) -> Result<(), AsslError> {
        let bad = |msg: String| Err(AsslError::InvalidConfig(msg));
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be >= 1".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.disc_steps == 0 {
            return bad("disc_steps must be >= 1".into());
        }
        for (name, hidden) in [
            ("encoder_hidden", &self.encoder_hidden),
            ("head_hidden", &self.head_hidden),
            ("discriminator_hidden", &self.discriminator_hidden),
        ] {
            if hidden.contains(&0) {
                return bad(format!("{name} contains a zero-width layer"));
            }
        }
        for (name, v) in [
            ("lambda_l", self.lambda_l),
            ("lambda_u", self.lambda_u),
            ("lambda_adv", self.lambda_adv),
            ("encoder_decay", self.encoder_decay),
            ("alpha", self.alpha),
            ("learning_rate", self.learning_rate),
            ("disc_learning_rate", self.disc_learning_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    /// Plain supervised training of encoder + supervised head: no pseudo
    /// batches, no adversarial term, no semi-supervised penalty.
    pub fn supervised_only(&self) -> Self {
        Self {
            use_pseudo: false,
            alpha: 0.0,
            lambda_u: 0.0,
            ..self.clone()
        }
    }

    /// Semi-supervised classification term removed.
    pub fn without_semi(&self) -> Self {
        Self {
            semi_loss: false,
            lambda_u: 0.0,
            ..self.clone()
        }
    }

    /// Pseudo-labels used, adversarial term off.
    pub fn without_adversarial(&self) -> Self {
        Self {
            alpha: 0.0,
            ..self.clone()
        }
    }

    pub(crate) fn adversarial_active(&self) -> bool {
        self.use_pseudo && self.use_discriminator
    }
}
