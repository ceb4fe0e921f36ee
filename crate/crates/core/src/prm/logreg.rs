use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::nn::{
    accumulate_l2, adam_step, mlp_backward, mlp_forward, softmax, softmax_rows, Activation,
    AdamState, DenseLayer, Matrix, MlpParams, Parameters,
};

use super::{check_labels, PrmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogregConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogregConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.1,
            l2: 1e-5,
        }
    }
}

/// Multinomial logistic regression: `softmax(W·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregModel {
    pub layer: DenseLayer,
}

impl LogregModel {
    pub fn zeros(num_features: usize, num_classes: usize) -> Self {
        Self {
            layer: DenseLayer::zeros(num_features, num_classes, Activation::Identity),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.layer.out_dim())
            .map(|k| {
                self.layer
                    .weights
                    .row(k)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.layer.bias[k]
            })
            .collect();
        softmax(&logits)
    }
}

/// Mean cross-entropy plus `l2·Σθ²`, and its gradient.
pub fn logreg_loss_and_grad(
    model: &LogregModel,
    x: &Matrix,
    labels: &[usize],
    l2: f64,
) -> Result<(f64, LogregModel), PrmError> {
    let net = MlpParams::new(vec![model.layer.clone()])?;
    let (logits, cache) = mlp_forward(&net, x)?;
    let probs = softmax_rows(&logits);
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut upstream = probs.clone();
    for (r, &y) in labels.iter().enumerate() {
        loss -= probs.get(r, y).max(1e-300).ln();
        upstream.set(r, y, upstream.get(r, y) - 1.0);
    }
    let upstream = upstream.scale(1.0 / n);
    let (mut grads, _) = mlp_backward(&net, &cache, &upstream)?;
    let penalty = accumulate_l2(&mut grads, &net, l2)?;
    let layer = grads.layers.pop().expect("one layer");
    Ok((loss / n + penalty, LogregModel { layer }))
}

impl Parameters for LogregModel {
    fn slices(&self) -> Vec<&[f64]> {
        vec![self.layer.weights.as_slice(), &self.layer.bias]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.layer.weights.as_mut_slice(), &mut self.layer.bias]
    }
}

/// Full-batch Adam on cross-entropy + L2 from a zero start.
pub fn train_logreg(labeled: &Dataset, cfg: &LogregConfig) -> Result<LogregModel, PrmError> {
    let labels = check_labels(labeled)?;
    if cfg.learning_rate.is_nan() || cfg.learning_rate < 0.0 {
        return Err(PrmError::InvalidConfig(format!(
            "learning rate must be >= 0, got {}",
            cfg.learning_rate
        )));
    }
    let mut model = LogregModel::zeros(labeled.rows().cols(), labeled.num_classes());
    let mut adam = AdamState::new(model.num_params(), cfg.learning_rate);
    for _ in 0..cfg.epochs {
        let (loss, grads) = logreg_loss_and_grad(&model, labeled.rows(), labels, cfg.l2)?;
        if !loss.is_finite() {
            return Err(PrmError::NonFinite("logistic regression loss".into()));
        }
        adam_step(&mut model, &grads, &mut adam)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::data::DatasetSchema;
    use crate::nn::{argmax, grad_check};
    use crate::rng::{stream, Stream};

    fn blobs(seed: u64) -> Dataset {
        let mut rng = stream(seed, Stream::Synthetic);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let k = i % 2;
            let c = if k == 0 { -3.0 } else { 3.0 };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rows.push([c + 0.5 * a, c + 0.5 * b]);
            labels.push(k);
        }
        Dataset::new(
            Arc::new(DatasetSchema::generic(2, 2).unwrap()),
            Matrix::from_rows(&rows).unwrap(),
            Some(labels),
        )
        .unwrap()
    }

    #[test]
    fn single_class_is_confident() {
        let d = Dataset::new(
            Arc::new(DatasetSchema::generic(2, 3).unwrap()),
            // zero-mean columns, as after z-scoring
            Matrix::from_rows(&[[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]).unwrap(),
            Some(vec![2, 2, 2]),
        )
        .unwrap();
        let m = train_logreg(&d, &LogregConfig::default()).unwrap();
        for x in [[0.0, 0.0], [3.0, -2.0], [-1.0, 1.0]] {
            let p = m.predict_proba(&x)[2];
            assert!(p >= 1.0 - 1e-3, "{p} at {x:?}");
        }
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let d = blobs(1);
        let m = train_logreg(&d, &LogregConfig::default()).unwrap();
        let labels = d.labels().unwrap();
        for (r, row) in d.rows().iter_rows().enumerate() {
            assert_eq!(argmax(&m.predict_proba(row)), labels[r]);
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LogregModel::zeros(3, 4);
        assert_eq!(m.predict_proba(&[1.0, 2.0, 3.0]), vec![0.25; 4]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = blobs(2);
        let mut rng = stream(5, Stream::Logreg);
        let mut model = LogregModel::zeros(2, 2);
        for w in model.layer.weights.as_mut_slice() {
            *w = rng.random_range(-0.5..0.5);
        }
        model.layer.bias = vec![0.1, -0.2];
        let labels = d.labels().unwrap();
        let (_, g) = logreg_loss_and_grad(&model, d.rows(), labels, 0.01).unwrap();
        let mut probe = model.clone();
        let err = grad_check(
            |theta| {
                probe.set_flat(theta);
                logreg_loss_and_grad(&probe, d.rows(), labels, 0.01).unwrap().0
            },
            &model.flat(),
            &g.flat(),
            1e-5,
        );
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn training_is_deterministic() {
        let d = blobs(3);
        let cfg = LogregConfig::default();
        assert_eq!(train_logreg(&d, &cfg).unwrap(), train_logreg(&d, &cfg).unwrap());
    }
}
