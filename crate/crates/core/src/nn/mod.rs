//! Dense networks with hand-written backpropagation.
//!
//! Just enough machinery for the rating models: row-major matrices, dense
//! layers, forward/backward through layer stacks, Adam, an L2 penalty and a
//! central-difference gradient checker. All math is `f64`.

mod activation;
mod matrix;
mod mlp;
mod optim;

use thiserror::Error;

pub use activation::{activate, argmax, sigmoid, softmax, softmax_rows, Activation};
pub use matrix::Matrix;
pub use mlp::{dense_forward, mlp_backward, mlp_forward, DenseLayer, ForwardCache, MlpParams};
pub use optim::{accumulate_l2, adam_step, l2_penalty, AdamState};

pub(crate) use activation::softmax_in_place;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A set of trainable values exposed as contiguous blocks in a fixed order.
///
/// Optimizers, penalties and gradient checks walk parameters through this
/// view so they do not care which network they are updating.
pub trait Parameters {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// Overwrites every parameter from `values`, in [`Parameters::slices`] order.
    fn set_flat(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for s in self.slices_mut() {
            for v in s {
                *v = *it.next().expect("flat parameter vector too short");
            }
        }
        assert!(it.next().is_none(), "flat parameter vector too long");
    }
}

/// Largest relative error between `analytic` and a central-difference
/// estimate of `∇loss` at `params`.
///
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], epsilon: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut theta = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + epsilon;
        let plus = loss(&theta);
        theta[i] = orig - epsilon;
        let minus = loss(&theta);
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}
