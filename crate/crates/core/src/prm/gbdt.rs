use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::nn::{softmax_in_place, Matrix};

use super::tree::{fit_presorted, Presorted, RegressionTree};
use super::{check_labels, PrmError};

/// Floor for class frequencies in the log-prior, so an absent class gets a
/// very negative but finite base score.
const MIN_PRIOR: f64 = 1e-12;

/// Slack allowed when checking that the training loss never goes up.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf_count: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            shrinkage: 0.1,
            min_leaf_count: 5,
        }
    }
}

/// Softmax gradient boosting: one tree per class per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub num_classes: usize,
    pub num_features: usize,
    pub shrinkage: f64,
    /// Log class frequencies of the training labels.
    pub base_score: Vec<f64>,
    /// `trees[t][k]` was fitted at round `t` for class `k`.
    pub trees: Vec<Vec<RegressionTree>>,
    /// Mean training log-loss before any round, then after each round.
    pub train_log_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    /// `base_score + ν·Σ_t tree_t(x)` per class.
    pub fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.base_score.clone();
        for round in &self.trees {
            for (k, tree) in round.iter().enumerate() {
                s[k] += self.shrinkage * tree.predict(x);
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.raw_scores(x);
        softmax_in_place(&mut s);
        s
    }
}

fn mean_log_loss(scores: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut p = vec![0.0; scores.cols()];
    for (r, &y) in labels.iter().enumerate() {
        p.copy_from_slice(scores.row(r));
        softmax_in_place(&mut p);
        total -= p[y].max(f64::MIN_POSITIVE).ln();
    }
    total / labels.len() as f64
}

pub fn train_gbdt(labeled: &Dataset, cfg: &GbdtConfig) -> Result<GbdtModel, PrmError> {
    let labels = check_labels(labeled)?;
    let m = labeled.num_classes();
    if !(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0) {
        return Err(PrmError::InvalidConfig(format!(
            "shrinkage must lie in (0, 1], got {}",
            cfg.shrinkage
        )));
    }
    if cfg.min_leaf_count == 0 {
        return Err(PrmError::InvalidConfig("min_leaf_count must be >= 1".into()));
    }
    let x = labeled.rows();
    let n = x.rows();

    let mut counts = vec![0usize; m];
    for &y in labels {
        counts[y] += 1;
    }
    let base_score: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(MIN_PRIOR).ln())
        .collect();

    let mut scores = Matrix::zeros(n, m);
    for r in 0..n {
        scores.row_mut(r).copy_from_slice(&base_score);
    }
    let presorted = Presorted::new(x);
    let mut loss = mean_log_loss(&scores, labels);
    let mut history = vec![loss];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let mut probs = Matrix::zeros(n, m);
    let mut residual = vec![0.0; n];

    for t in 0..cfg.rounds {
        probs.as_mut_slice().copy_from_slice(scores.as_slice());
        for r in 0..n {
            softmax_in_place(probs.row_mut(r));
        }
        let mut round = Vec::with_capacity(m);
        for k in 0..m {
            for (r, res) in residual.iter_mut().enumerate() {
                let y = if labels[r] == k { 1.0 } else { 0.0 };
                *res = y - probs.get(r, k);
            }
            let tree = fit_presorted(x, &residual, &presorted, cfg.max_depth, cfg.min_leaf_count);
            round.push(tree);
        }
        // Scores move only after every class tree has seen the same probabilities.
        for (k, tree) in round.iter().enumerate() {
            for r in 0..n {
                let s = scores.get(r, k) + cfg.shrinkage * tree.predict(x.row(r));
                scores.set(r, k, s);
            }
        }
        trees.push(round);
        let next = mean_log_loss(&scores, labels);
        if next > loss + MONOTONE_SLACK * (1.0 + loss) {
            return Err(PrmError::LossIncreased {
                round: t + 1,
                before: loss,
                after: next,
            });
        }
        loss = next;
        history.push(loss);
    }

    Ok(GbdtModel {
        num_classes: m,
        num_features: x.cols(),
        shrinkage: cfg.shrinkage,
        base_score,
        trees,
        train_log_loss: history,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::DatasetSchema;
    use crate::prm::tree::Node;

    fn ds(rows: Vec<[f64; 1]>, labels: Vec<usize>, m: usize) -> Dataset {
        Dataset::new(
            Arc::new(DatasetSchema::generic(1, m).unwrap()),
            Matrix::from_rows(&rows).unwrap(),
            Some(labels),
        )
        .unwrap()
    }

    #[test]
    fn zero_rounds_uniform_prior() {
        let d = ds(vec![[0.0], [1.0], [2.0]], vec![0, 1, 2], 3);
        let cfg = GbdtConfig {
            rounds: 0,
            ..Default::default()
        };
        let model = train_gbdt(&d, &cfg).unwrap();
        for p in model.predict_proba(&[0.5]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn separable_line() {
        let rows: Vec<[f64; 1]> = (-20..20).map(|i| [i as f64 / 4.0]).collect();
        let labels = rows.iter().map(|r| usize::from(r[0] >= 0.0)).collect();
        let d = ds(rows.clone(), labels, 2);
        let cfg = GbdtConfig {
            rounds: 20,
            max_depth: 2,
            shrinkage: 0.3,
            min_leaf_count: 1,
        };
        let model = train_gbdt(&d, &cfg).unwrap();
        for r in &rows {
            let p = model.predict_proba(r);
            assert_eq!(crate::nn::argmax(&p), usize::from(r[0] >= 0.0));
        }
        assert!(model.train_log_loss.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn hand_built_model_scores() {
        let tree = RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 2.0 },
            ],
            max_depth: 1,
            min_leaf_count: 1,
        };
        let model = GbdtModel {
            num_classes: 2,
            num_features: 1,
            shrinkage: 0.5,
            base_score: vec![0.25, -0.25],
            trees: vec![vec![tree.clone(), RegressionTree::leaf(0.0)]],
            train_log_loss: vec![],
        };
        // x = 1: scores [0.25 + 0.5*2, -0.25] = [1.25, -0.25]
        let p = model.predict_proba(&[1.0]);
        let e = (1.5f64).exp();
        assert!((p[0] - e / (1.0 + e)).abs() < 1e-15);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_errors() {
        let d = ds(vec![[0.0], [1.0]], vec![0, 1], 2);
        for bad in [0.0, 1.5, -0.1] {
            let cfg = GbdtConfig {
                shrinkage: bad,
                ..Default::default()
            };
            assert!(matches!(train_gbdt(&d, &cfg), Err(PrmError::InvalidConfig(_))));
        }
        let empty = Dataset::empty(d.schema().clone(), true);
        assert!(matches!(
            train_gbdt(&empty, &GbdtConfig::default()),
            Err(PrmError::Empty(_))
        ));
    }
}
