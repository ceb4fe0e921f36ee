//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use credit_assl::nn::Matrix;

/// Best depth-1 split by exhaustive search over every feature and midpoint,
/// as `(feature, threshold, sse_reduction, left_mean, right_mean)`.
/// Reductions within `1e-12·(1 + Σt²)` of each other tie; the first one
/// found (lowest feature, then lowest threshold) wins.
pub fn stump_oracle(x: &Matrix, t: &[f64]) -> Option<(usize, f64, f64, f64, f64)> {
    let sse = |idx: &[usize]| {
        let mean = idx.iter().map(|&i| t[i]).sum::<f64>() / idx.len() as f64;
        (idx.iter().map(|&i| (t[i] - mean).powi(2)).sum::<f64>(), mean)
    };
    let all: Vec<usize> = (0..x.rows()).collect();
    let (parent, _) = sse(&all);
    let tol = 1e-12 * (1.0 + t.iter().map(|v| v * v).sum::<f64>());
    let mut best: Option<(f64, usize, f64, f64, f64)> = None;
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = all.iter().map(|&i| x.get(i, f)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x.get(i, f) <= thr);
            let ((sl, ml), (sr, mr)) = (sse(&l), sse(&r));
            let total = sl + sr;
            if total < parent - tol && best.is_none_or(|b| total < b.0 - tol) {
                best = Some((total, f, thr, ml, mr));
            }
        }
    }
    best.map(|(total, f, thr, ml, mr)| (f, thr, parent - total, ml, mr))
}

/// Per-class `(precision, recall, f1, support)` from raw counts, with 0 for
/// every zero division.
pub fn brute_force_metrics(counts: &[Vec<u64>]) -> Vec<(f64, f64, f64, u64)> {
    let m = counts.len();
    (0..m)
        .map(|k| {
            let tp = counts[k][k];
            let fp: u64 = (0..m).filter(|&i| i != k).map(|i| counts[i][k]).sum();
            let fn_: u64 = (0..m).filter(|&j| j != k).map(|j| counts[k][j]).sum();
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f1, tp + fn_)
        })
        .collect()
}
