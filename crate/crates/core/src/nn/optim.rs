use serde::{Deserialize, Serialize};

use super::{NnError, Parameters};

/// Adam hyperparameters plus moment buffers for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self::with_betas(num_params, learning_rate, 0.9, 0.999, 1e-8)
            .expect("default betas are valid")
    }

    pub fn with_betas(
        num_params: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self, NnError> {
        if !(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0) {
            return Err(NnError::InvalidArgument(format!(
                "Adam betas must lie in (0, 1), got {beta1} and {beta2}"
            )));
        }
        if !(learning_rate >= 0.0 && epsilon > 0.0) {
            return Err(NnError::InvalidArgument(format!(
                "learning rate must be >= 0 and epsilon > 0, got {learning_rate} and {epsilon}"
            )));
        }
        Ok(Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step_count: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        })
    }

    pub fn num_params(&self) -> usize {
        self.first_moment.len()
    }
}

/// One bias-corrected Adam update of `params` along `-grads`.
pub fn adam_step<P: Parameters>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
) -> Result<(), NnError> {
    let n = params.num_params();
    if grads.num_params() != n || state.num_params() != n {
        return Err(NnError::Shape(format!(
            "Adam got {n} parameters, {} gradients and {} moment slots",
            grads.num_params(),
            state.num_params()
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;

    let mut k = 0;
    for (p_slice, g_slice) in params.slices_mut().into_iter().zip(grads.slices()) {
        if p_slice.len() != g_slice.len() {
            return Err(NnError::Shape(
                "gradient block does not match parameter block".into(),
            ));
        }
        for (p, &g) in p_slice.iter_mut().zip(g_slice) {
            let m = b1 * state.first_moment[k] + (1.0 - b1) * g;
            let v = b2 * state.second_moment[k] + (1.0 - b2) * g * g;
            state.first_moment[k] = m;
            state.second_moment[k] = v;
            let m_hat = m / c1;
            let v_hat = v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            k += 1;
        }
    }
    Ok(())
}

/// `λ·Σθ²` over every weight and bias, with gradient `2λθ`.
pub fn l2_penalty<P: Parameters + Clone>(params: &P, lambda: f64) -> Result<(f64, P), NnError> {
    check_lambda(lambda)?;
    let mut grads = params.clone();
    let mut value = 0.0;
    for (g_slice, p_slice) in grads.slices_mut().into_iter().zip(params.slices()) {
        for (g, &w) in g_slice.iter_mut().zip(p_slice) {
            value += w * w;
            *g = 2.0 * lambda * w;
        }
    }
    Ok((lambda * value, grads))
}

/// Adds `2λθ` into `grads` in place and returns `λ·Σθ²`.
pub fn accumulate_l2<P: Parameters>(grads: &mut P, params: &P, lambda: f64) -> Result<f64, NnError> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut value = 0.0;
    for (g_slice, p_slice) in grads.slices_mut().into_iter().zip(params.slices()) {
        for (g, &w) in g_slice.iter_mut().zip(p_slice) {
            value += w * w;
            *g += 2.0 * lambda * w;
        }
    }
    Ok(lambda * value)
}

fn check_lambda(lambda: f64) -> Result<(), NnError> {
    if lambda.is_nan() || lambda < 0.0 || !lambda.is_finite() {
        return Err(NnError::InvalidArgument(format!(
            "regularization weight must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Activation, DenseLayer, Matrix, MlpParams};

    fn scalar(w: f64) -> MlpParams {
        MlpParams::new(vec![DenseLayer::new(
            Matrix::from_rows(&[[w]]).unwrap(),
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(1.5);
        let g = p.zeros_like();
        let mut st = AdamState::new(p.num_params(), 0.01);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p, scalar(1.5));
        assert_eq!(st.step_count, 3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(1.0);
        let mut g = p.zeros_like();
        g.layers[0].weights.set(0, 0, -4.0);
        g.layers[0].bias[0] = 0.25;
        let mut st = AdamState::new(p.num_params(), 0.01);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!((p.layers[0].weights.get(0, 0) - 1.01).abs() < 1e-9);
        assert!((p.layers[0].bias[0] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let (g1, g2) = (0.3, -1.2);
        let mut p = scalar(2.0);
        let mut st = AdamState::with_betas(2, lr, b1, b2, eps).unwrap();
        for g in [g1, g2] {
            let mut gr = p.zeros_like();
            gr.layers[0].weights.set(0, 0, g);
            adam_step(&mut p, &gr, &mut st).unwrap();
        }
        // hand-unrolled
        let m1 = (1.0 - b1) * g1;
        let v1 = (1.0 - b2) * g1 * g1;
        let w1 = 2.0 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g2;
        let v2 = b2 * v1 + (1.0 - b2) * g2 * g2;
        let w2 = w1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p.layers[0].weights.get(0, 0) - w2).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = scalar(-0.7);
        let mut g = p.zeros_like();
        g.layers[0].weights.set(0, 0, 3.0);
        let mut st = AdamState::new(p.num_params(), 0.0);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, scalar(-0.7));
    }

    #[test]
    fn bad_betas_and_shapes_rejected() {
        assert!(AdamState::with_betas(1, 0.1, 1.0, 0.9, 1e-8).is_err());
        let mut p = scalar(1.0);
        let g = p.zeros_like();
        let mut st = AdamState::new(5, 0.1);
        assert!(adam_step(&mut p, &g, &mut st).is_err());
    }

    #[test]
    fn l2_examples() {
        let p = scalar(2.0);
        let (v, g) = l2_penalty(&p, 0.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.flat().iter().all(|&x| x == 0.0));
        let (v, g) = l2_penalty(&p, 0.5).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g.layers[0].weights.get(0, 0), 2.0);
        assert!(l2_penalty(&p, -1.0).is_err());
    }

    #[test]
    fn l2_gradient_matches_finite_differences() {
        let p = MlpParams::new(vec![DenseLayer::new(
            Matrix::from_rows(&[[0.5, -1.25], [2.0, 0.75]]).unwrap(),
            vec![0.3, -0.9],
            Activation::Relu,
        )
        .unwrap()])
        .unwrap();
        let lambda = 0.37;
        let (_, g) = l2_penalty(&p, lambda).unwrap();
        let mut probe = p.clone();
        let err = grad_check(
            |theta| {
                probe.set_flat(theta);
                l2_penalty(&probe, lambda).unwrap().0
            },
            &p.flat(),
            &g.flat(),
            1e-5,
        );
        assert!(err < 1e-8, "{err}");
    }
}
