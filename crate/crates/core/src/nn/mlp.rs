use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Matrix, NnError, Parameters};

/// Fully connected layer computing `activation(X·Wᵀ + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out_dim × in_dim`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self, NnError> {
        if bias.len() != weights.rows() {
            return Err(NnError::Shape(format!(
                "bias of length {} does not fit weights of shape {}x{}",
                bias.len(),
                weights.rows(),
                weights.cols()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// He-uniform for relu, Xavier-uniform otherwise; biases start at zero.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            Activation::Sigmoid | Activation::Identity => {
                (6.0 / (in_dim + out_dim) as f64).sqrt()
            }
        };
        let mut weights = Matrix::zeros(out_dim, in_dim);
        for w in weights.as_mut_slice() {
            *w = rng.random_range(-limit..=limit);
        }
        Self {
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Returns `(pre_activation, output)`.
    fn forward_parts(&self, x: &Matrix) -> Result<(Matrix, Matrix), NnError> {
        if x.cols() != self.in_dim() {
            return Err(NnError::Shape(format!(
                "layer expects {} input columns but batch has {}",
                self.in_dim(),
                x.cols()
            )));
        }
        let mut z = x.matmul_transposed(&self.weights)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        let a = super::activate(self.activation, &z);
        Ok((z, a))
    }
}

/// `activation(X·Wᵀ + b)` for a batch `X` of shape `n × in_dim`.
pub fn dense_forward(layer: &DenseLayer, x: &Matrix) -> Result<Matrix, NnError> {
    layer.forward_parts(x).map(|(_, a)| a)
}

/// An ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

impl MlpParams {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Shape("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NnError::Shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Builds `in → hidden[0] → … → out`, with `hidden_activation` on every
    /// hidden layer and `output_activation` on the last.
    pub fn init<R: Rng>(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(in_dim);
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    output_activation
                } else {
                    hidden_activation
                };
                DenseLayer::init(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Same architecture with every weight and bias set to zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim(), l.activation))
                .collect(),
        }
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, NnError> {
        let mut cur = dense_forward(&self.layers[0], x)?;
        for layer in &self.layers[1..] {
            cur = dense_forward(layer, &cur)?;
        }
        Ok(cur)
    }
}

impl Parameters for MlpParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }
}

/// Intermediates of one [`mlp_forward`] call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to layer `i`.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.post[self.post.len() - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.pre.len()
    }
}

pub fn mlp_forward(mlp: &MlpParams, x: &Matrix) -> Result<(Matrix, ForwardCache), NnError> {
    let n = mlp.layers.len();
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(n),
        pre: Vec::with_capacity(n),
        post: Vec::with_capacity(n),
    };
    let mut cur = x.clone();
    for layer in &mlp.layers {
        let (z, a) = layer.forward_parts(&cur)?;
        cache.inputs.push(cur);
        cache.pre.push(z);
        cur = a.clone();
        cache.post.push(a);
    }
    Ok((cur, cache))
}

/// Reverse-mode pass. `upstream` is `∂L/∂output`; returns parameter gradients
/// (laid out like `mlp`) and `∂L/∂input`.
pub fn mlp_backward(
    mlp: &MlpParams,
    cache: &ForwardCache,
    upstream: &Matrix,
) -> Result<(MlpParams, Matrix), NnError> {
    if cache.num_layers() != mlp.layers.len() {
        return Err(NnError::Shape(format!(
            "cache holds {} layers but network has {}",
            cache.num_layers(),
            mlp.layers.len()
        )));
    }
    if upstream.shape() != cache.output().shape() {
        return Err(NnError::Shape(format!(
            "upstream gradient is {}x{} but network output is {}x{}",
            upstream.rows(),
            upstream.cols(),
            cache.output().rows(),
            cache.output().cols()
        )));
    }
    let mut grads = Vec::with_capacity(mlp.layers.len());
    let mut delta = upstream.clone();
    for (i, layer) in mlp.layers.iter().enumerate().rev() {
        let z = &cache.pre[i];
        let a = &cache.post[i];
        if z.cols() != layer.out_dim() || cache.inputs[i].cols() != layer.in_dim() {
            return Err(NnError::Shape(format!(
                "cache for layer {i} does not match a {}x{} layer",
                layer.out_dim(),
                layer.in_dim()
            )));
        }
        // δ ← δ ⊙ σ'(z)
        if layer.activation != super::Activation::Identity {
            for ((d, &zv), &av) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(z.as_slice())
                .zip(a.as_slice())
            {
                *d *= layer.activation.derivative(zv, av);
            }
        }
        let dw = delta.transpose_matmul(&cache.inputs[i])?;
        let db = delta.column_sums();
        let next = delta.matmul(&layer.weights)?;
        grads.push(DenseLayer {
            weights: dw,
            bias: db,
            activation: layer.activation,
        });
        delta = next;
    }
    grads.reverse();
    Ok((MlpParams { layers: grads }, delta))
}
