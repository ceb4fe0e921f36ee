//! Phase II loss terms and their gradients with respect to network outputs.

use crate::nn::{l2_penalty, Matrix, MlpParams};

use super::AsslError;

/// Probabilities are clamped into `[PROB_FLOOR, 1 − PROB_FLOOR]` before any log.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Per-sample log-likelihood derivative is zero where the clamp is active.
#[inline]
fn inside(p: f64) -> bool {
    (PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p)
}

/// Which classification loss the two heads minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLoss {
    /// `−Σ_i [y_i log ŷ_i + (1 − y_i) log(1 − ŷ_i)]` over one-hot `y`.
    #[default]
    PerClassBce,
    /// `−log ŷ_y`.
    Categorical,
}

fn check_labels(probs: &Matrix, labels: &[usize]) -> Result<(), AsslError> {
    if probs.rows() != labels.len() {
        return Err(AsslError::Shape(format!(
            "{} probability rows for {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    let m = probs.cols();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &k)| k >= m) {
        return Err(AsslError::LabelOutOfRange {
            row,
            label,
            num_classes: m,
        });
    }
    Ok(())
}

/// Batch-mean classification loss of softmax outputs, and its gradient with
/// respect to the *logits* that produced them.
pub fn class_loss_and_logit_grad(
    kind: ClassLoss,
    probs: &Matrix,
    labels: &[usize],
) -> Result<(f64, Matrix), AsslError> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let m = probs.cols();
    let mut total = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), m);
    let mut dp = vec![0.0; m];
    for (r, &y) in labels.iter().enumerate() {
        let p = probs.row(r);
        match kind {
            ClassLoss::PerClassBce => {
                // ∂ℓ/∂p_i, then through the softmax Jacobian:
                // ∂ℓ/∂z_j = p_j (dp_j − Σ_i dp_i p_i)
                for i in 0..m {
                    let pi = p[i];
                    let cp = clamp(pi);
                    if i == y {
                        total -= cp.ln();
                        dp[i] = if inside(pi) { -1.0 / pi } else { 0.0 };
                    } else {
                        total -= (1.0 - cp).ln();
                        dp[i] = if inside(pi) { 1.0 / (1.0 - pi) } else { 0.0 };
                    }
                }
                let mut s = 0.0;
                for i in 0..m {
                    s += dp[i] * p[i];
                }
                let g = grad.row_mut(r);
                for j in 0..m {
                    g[j] = p[j] * (dp[j] - s) / n;
                }
            }
            ClassLoss::Categorical => {
                total -= clamp(p[y]).ln();
                let g = grad.row_mut(r);
                for j in 0..m {
                    let t = if j == y { 1.0 } else { 0.0 };
                    g[j] = (p[j] - t) / n;
                }
            }
        }
    }
    Ok((total / n, grad))
}

/// Supervised / semi-supervised loss: mean per-class binary cross-entropy of
/// `probs` against one-hot `labels`, plus `λ·‖Δ‖²` over `params`.
pub fn loss_bce_l2(
    probs: &Matrix,
    labels: &[usize],
    lambda: f64,
    params: &[&MlpParams],
) -> Result<f64, AsslError> {
    let (data, _) = class_loss_and_logit_grad(ClassLoss::PerClassBce, probs, labels)?;
    let mut penalty = 0.0;
    for p in params {
        penalty += l2_penalty(*p, lambda)?.0;
    }
    Ok(data + penalty)
}

/// Mean log-likelihood of the discriminator calling labeled embeddings
/// labeled and pseudo-labeled embeddings pseudo-labeled:
/// `(1/L)Σ log D(e_l) + (1/U)Σ log(1 − D(e_u))`.
pub fn adversarial_log_likelihood(d_labeled: &[f64], d_unlabeled: &[f64]) -> Result<f64, AsslError> {
    if d_labeled.is_empty() || d_unlabeled.is_empty() {
        return Err(AsslError::Empty("one side of the adversarial batch".into()));
    }
    let l = d_labeled.iter().map(|&d| clamp(d).ln()).sum::<f64>() / d_labeled.len() as f64;
    let u = d_unlabeled.iter().map(|&d| (1.0 - clamp(d)).ln()).sum::<f64>() / d_unlabeled.len() as f64;
    Ok(l + u)
}

/// `∂/∂D` of [`adversarial_log_likelihood`] for each discriminator output.
pub(crate) fn adversarial_output_grads(d_labeled: &[f64], d_unlabeled: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nl = d_labeled.len() as f64;
    let nu = d_unlabeled.len() as f64;
    let gl = d_labeled
        .iter()
        .map(|&d| if inside(d) { 1.0 / (nl * d) } else { 0.0 })
        .collect();
    let gu = d_unlabeled
        .iter()
        .map(|&d| if inside(d) { -1.0 / (nu * (1.0 - d)) } else { 0.0 })
        .collect();
    (gl, gu)
}

/// Adversarial loss: [`adversarial_log_likelihood`] plus `λ_adv·‖Δ_adv‖²`.
///
/// Each log term is at most zero, so with `λ_adv = 0` the value is `≤ 0`,
/// approaching 0 only for a perfectly confident, perfectly right
/// discriminator.
pub fn loss_adversarial(
    d_labeled: &[f64],
    d_unlabeled: &[f64],
    lambda_adv: f64,
    disc_params: &MlpParams,
) -> Result<f64, AsslError> {
    let ll = adversarial_log_likelihood(d_labeled, d_unlabeled)?;
    Ok(ll + l2_penalty(disc_params, lambda_adv)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, softmax_rows, Activation, DenseLayer};

    fn probs(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn no_params() -> MlpParams {
        MlpParams::new(vec![DenseLayer::zeros(1, 1, Activation::Sigmoid)]).unwrap()
    }

    #[test]
    fn bce_examples() {
        let exact = loss_bce_l2(&probs(&[&[0.0, 1.0, 0.0]]), &[1], 0.0, &[]).unwrap();
        assert!(exact.abs() < 1e-10, "{exact}");

        let v = loss_bce_l2(&probs(&[&[0.5, 0.5]]), &[0], 0.0, &[]).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((v - 1.386294).abs() < 1e-6);

        let v = loss_bce_l2(&probs(&[&[0.7, 0.2, 0.1]]), &[0], 0.0, &[]).unwrap();
        let hand = -(0.7f64.ln() + 0.8f64.ln() + 0.9f64.ln());
        assert!((v - hand).abs() < 1e-12);
        assert!((v - 0.685180).abs() < 1e-6);
    }

    #[test]
    fn bce_penalty_and_errors() {
        let p = MlpParams::new(vec![DenseLayer::new(
            Matrix::from_rows(&[[2.0]]).unwrap(),
            vec![1.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let v = loss_bce_l2(&probs(&[&[0.5, 0.5]]), &[0], 0.5, &[&p]).unwrap();
        assert!((v - (2.0 * 2f64.ln() + 0.5 * 5.0)).abs() < 1e-12);
        assert!(matches!(
            loss_bce_l2(&probs(&[&[0.5, 0.5]]), &[2], 0.0, &[]),
            Err(AsslError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn adversarial_examples() {
        let sat = loss_adversarial(&[1.0 - 1e-12], &[1e-12], 0.0, &no_params()).unwrap();
        assert!(sat.abs() < 1e-10, "{sat}");

        let half = loss_adversarial(&[0.5, 0.5], &[0.5], 0.0, &no_params()).unwrap();
        assert!((half - 2.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((half + 1.386294).abs() < 1e-6);

        let v = loss_adversarial(&[0.9, 0.8], &[0.3, 0.1], 0.0, &no_params()).unwrap();
        let hand = 0.5 * (0.9f64.ln() + 0.8f64.ln()) + 0.5 * (0.7f64.ln() + 0.9f64.ln());
        assert!((v - hand).abs() < 1e-12);
        assert!((v + 0.395270).abs() < 1e-6);

        assert!(loss_adversarial(&[], &[0.5], 0.0, &no_params()).is_err());
        assert!(loss_adversarial(&[0.5], &[], 0.0, &no_params()).is_err());
    }

    #[test]
    fn saturated_probabilities_stay_finite() {
        let (v, g) =
            class_loss_and_logit_grad(ClassLoss::PerClassBce, &probs(&[&[1.0, 0.0]]), &[1]).unwrap();
        assert!(v.is_finite() && g.is_finite());
        let v = loss_adversarial(&[0.0], &[1.0], 0.0, &no_params()).unwrap();
        assert!(v.is_finite());
    }

    fn logit_check(kind: ClassLoss) -> f64 {
        let logits = Matrix::from_rows(&[[0.3, -1.2, 2.0], [1.5, 0.1, -0.4], [0.0, 0.7, 0.2]]).unwrap();
        let labels = [2, 0, 1];
        let (_, g) = class_loss_and_logit_grad(kind, &softmax_rows(&logits), &labels).unwrap();
        grad_check(
            |z| {
                let m = Matrix::from_vec(3, 3, z.to_vec()).unwrap();
                class_loss_and_logit_grad(kind, &softmax_rows(&m), &labels).unwrap().0
            },
            logits.as_slice(),
            g.as_slice(),
            1e-5,
        )
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        assert!(logit_check(ClassLoss::PerClassBce) < 1e-6);
        assert!(logit_check(ClassLoss::Categorical) < 1e-6);
    }

    #[test]
    fn output_gradients_match_finite_differences() {
        let dl = [0.9, 0.35, 0.6];
        let du = [0.2, 0.75];
        let (gl, gu) = adversarial_output_grads(&dl, &du);
        let analytic: Vec<f64> = gl.into_iter().chain(gu).collect();
        let all: Vec<f64> = dl.iter().chain(&du).copied().collect();
        let err = grad_check(
            |d| adversarial_log_likelihood(&d[..3], &d[3..]).unwrap(),
            &all,
            &analytic,
            1e-6,
        );
        assert!(err < 1e-6, "{err}");
    }
}
