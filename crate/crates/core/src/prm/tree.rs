use serde::{Deserialize, Serialize};

use crate::nn::Matrix;

use super::PrmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub min_leaf_count: usize,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
            max_depth: 0,
            min_leaf_count: 1,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// The root split, if any: `(feature, threshold)`.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

/// Row indices sorted by each feature's value (ties by row index).
pub(crate) struct Presorted {
    by_feature: Vec<Vec<usize>>,
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let by_feature = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.rows()).collect();
                idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { by_feature }
    }
}

/// Greedy exact regression tree on squared error.
///
/// At each node every feature is scanned in sorted order and every midpoint
/// between consecutive distinct values is a candidate; the candidate with the
/// largest SSE reduction wins (lowest feature, then lowest threshold, on
/// ties). Leaves hold the mean target. Growth stops at `max_depth`, when a
/// child would fall under `min_leaf_count` rows, or when no split reduces SSE.
pub fn fit_regression_tree(
    x: &Matrix,
    targets: &[f64],
    max_depth: usize,
    min_leaf_count: usize,
) -> Result<RegressionTree, PrmError> {
    if x.rows() == 0 {
        return Err(PrmError::Empty("tree training set".into()));
    }
    if targets.len() != x.rows() {
        return Err(PrmError::Dimension(format!(
            "{} targets for {} rows",
            targets.len(),
            x.rows()
        )));
    }
    if min_leaf_count == 0 {
        return Err(PrmError::InvalidConfig("min_leaf_count must be >= 1".into()));
    }
    Ok(fit_presorted(x, targets, &Presorted::new(x), max_depth, min_leaf_count))
}

pub(crate) fn fit_presorted(
    x: &Matrix,
    targets: &[f64],
    presorted: &Presorted,
    max_depth: usize,
    min_leaf_count: usize,
) -> RegressionTree {
    let mut builder = Builder {
        x,
        targets,
        min_leaf_count,
        nodes: Vec::new(),
        goes_left: vec![false; x.rows()],
    };
    builder.grow(presorted.by_feature.clone(), max_depth);
    RegressionTree {
        nodes: builder.nodes,
        max_depth,
        min_leaf_count,
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    targets: &'a [f64],
    min_leaf_count: usize,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    /// `sorted[f]` lists this node's rows ordered by feature `f`.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth_left: usize) -> usize {
        let id = self.nodes.len();
        let rows = &sorted[0];
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let mean = sum / n as f64;
        self.nodes.push(Node::Leaf { value: mean });

        if depth_left == 0 || n < 2 * self.min_leaf_count {
            return id;
        }
        let Some(best) = self.best_split(&sorted, sum) else {
            return id;
        };

        for &r in rows {
            self.goes_left[r] = self.x.get(r, best.feature) <= best.threshold;
        }
        let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| self.goes_left[r]))
            .unzip();
        let l = self.grow(left, depth_left - 1);
        let r = self.grow(right, depth_left - 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&self, sorted: &[Vec<usize>], sum: f64) -> Option<Candidate> {
        let n = sorted[0].len();
        let parent = sum * sum / n as f64;
        let sum_sq: f64 = sorted[0].iter().map(|&r| self.targets[r].powi(2)).sum();
        // Gains below this are rounding noise, e.g. on constant targets, and
        // two gains closer than this are a tie.
        let tol = 1e-12 * (1.0 + sum_sq);
        let mut best: Option<Candidate> = None;
        for (f, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.targets[order[i]];
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf_count {
                    continue;
                }
                if n_right < self.min_leaf_count {
                    break;
                }
                let lo = self.x.get(order[i], f);
                let hi = self.x.get(order[i + 1], f);
                if lo == hi {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / n_right as f64
                    - parent;
                if gain > tol && best.as_ref().is_none_or(|b| gain > b.gain + tol) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: lo + (hi - lo) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }
}
