use serde::{Deserialize, Serialize};

use crate::nn::{argmax, softmax_rows, Activation, Matrix, MlpParams, Parameters};
use crate::rng::{stream, Stream};

use super::{AsslConfig, AsslError};

/// Which head produces predictions at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceHead {
    #[default]
    Supervised,
    Semi,
    /// Mean of both heads' probabilities.
    Averaged,
}

/// Encoder, both classifier heads and the discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsslModel {
    pub encoder: MlpParams,
    pub supervised_head: MlpParams,
    pub semi_head: MlpParams,
    pub discriminator: MlpParams,
}

impl AsslModel {
    /// Seeded initialization. Each network draws from its own stream.
    ///
    /// Hidden layers use relu. The encoder's last layer is linear, so no
    /// embedding coordinate can die at zero.
    pub fn init(input_dim: usize, num_classes: usize, cfg: &AsslConfig) -> Result<Self, AsslError> {
        cfg.validate()?;
        if input_dim == 0 || num_classes < 2 {
            return Err(AsslError::InvalidConfig(format!(
                "need >= 1 feature and >= 2 classes, got {input_dim} and {num_classes}"
            )));
        }
        let d = cfg.embedding_dim;
        let relu = Activation::Relu;
        let encoder = MlpParams::init(
            input_dim,
            &cfg.encoder_hidden,
            d,
            relu,
            Activation::Identity,
            &mut stream(cfg.seed, Stream::Encoder),
        );
        let head = |s| {
            MlpParams::init(
                d,
                &cfg.head_hidden,
                num_classes,
                relu,
                Activation::Identity,
                &mut stream(cfg.seed, s),
            )
        };
        let supervised_head = head(Stream::SupervisedHead);
        let semi_head = head(Stream::SemiHead);
        let discriminator = MlpParams::init(
            d,
            &cfg.discriminator_hidden,
            1,
            relu,
            Activation::Sigmoid,
            &mut stream(cfg.seed, Stream::Discriminator),
        );
        Self::new(encoder, supervised_head, semi_head, discriminator)
    }

    /// Checks that all four networks agree on `d` and `m`.
    pub fn new(
        encoder: MlpParams,
        supervised_head: MlpParams,
        semi_head: MlpParams,
        discriminator: MlpParams,
    ) -> Result<Self, AsslError> {
        let d = encoder.out_dim();
        for (name, net) in [
            ("supervised head", &supervised_head),
            ("semi-supervised head", &semi_head),
            ("discriminator", &discriminator),
        ] {
            if net.in_dim() != d {
                return Err(AsslError::Shape(format!(
                    "{name} expects {}-dim embeddings but the encoder emits {d}",
                    net.in_dim()
                )));
            }
        }
        if supervised_head.out_dim() != semi_head.out_dim() {
            return Err(AsslError::Shape(format!(
                "heads disagree on class count: {} vs {}",
                supervised_head.out_dim(),
                semi_head.out_dim()
            )));
        }
        if discriminator.out_dim() != 1 {
            return Err(AsslError::Shape(format!(
                "discriminator must emit 1 value, emits {}",
                discriminator.out_dim()
            )));
        }
        Ok(Self {
            encoder,
            supervised_head,
            semi_head,
            discriminator,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.supervised_head.out_dim()
    }

    /// Class probabilities for each row of `x`.
    pub fn predict_proba(&self, x: &Matrix, head: InferenceHead) -> Result<Matrix, AsslError> {
        if x.cols() != self.input_dim() {
            return Err(AsslError::Shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let e = encode(&self.encoder, x)?;
        Ok(match head {
            InferenceHead::Supervised => classify(&self.supervised_head, &e)?,
            InferenceHead::Semi => classify(&self.semi_head, &e)?,
            InferenceHead::Averaged => {
                let a = classify(&self.supervised_head, &e)?;
                let b = classify(&self.semi_head, &e)?;
                a.add(&b)?.scale(0.5)
            }
        })
    }

    /// Most probable class per row, lowest index on ties.
    pub fn predict_labels(&self, x: &Matrix, head: InferenceHead) -> Result<Vec<usize>, AsslError> {
        Ok(self.predict_proba(x, head)?.iter_rows().map(argmax).collect())
    }

    /// Rating for one feature vector, with its probability vector.
    pub fn predict_rating(&self, x: &[f64], head: InferenceHead) -> Result<(usize, Vec<f64>), AsslError> {
        let row = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let p = self.predict_proba(&row, head)?.into_vec();
        Ok((argmax(&p), p))
    }

    /// Parameters of the networks the generator step updates, flattened in
    /// encoder, supervised head, semi head order.
    pub fn generator_flat(&self) -> Vec<f64> {
        [self.encoder.flat(), self.supervised_head.flat(), self.semi_head.flat()].concat()
    }

    pub fn set_generator_flat(&mut self, values: &[f64]) {
        let a = self.encoder.num_params();
        let b = a + self.supervised_head.num_params();
        self.encoder.set_flat(&values[..a]);
        self.supervised_head.set_flat(&values[a..b]);
        self.semi_head.set_flat(&values[b..]);
    }
}

/// Maps a batch of rows into the shared embedding space.
pub fn encode(encoder: &MlpParams, batch: &Matrix) -> Result<Matrix, AsslError> {
    Ok(encoder.predict(batch)?)
}

/// Softmax over a head's logits.
pub fn classify(head: &MlpParams, embeddings: &Matrix) -> Result<Matrix, AsslError> {
    Ok(softmax_rows(&head.predict(embeddings)?))
}
