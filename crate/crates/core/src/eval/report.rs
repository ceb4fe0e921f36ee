use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, EvalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub predicted: u64,
    /// The class was never predicted, so precision was set to 0.
    pub precision_undefined: bool,
    /// The class never occurs, so recall was set to 0.
    pub recall_undefined: bool,
}

/// Per-class and averaged classification metrics.
///
/// Macro averages run over classes with nonzero support. Micro and weighted
/// variants are included alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let support = cm.support();
    let predicted = cm.predicted();
    let per_class: Vec<ClassMetrics> = (0..cm.num_classes())
        .map(|k| {
            let tp = cm.get(k, k);
            let (precision, precision_undefined) = ratio(tp, predicted[k]);
            let (recall, recall_undefined) = ratio(tp, support[k]);
            ClassMetrics {
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: support[k],
                predicted: predicted[k],
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();

    let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let n_present = present.len() as f64;
    let mean_of = |f: fn(&ClassMetrics) -> f64| present.iter().map(|c| f(c)).sum::<f64>() / n_present;
    let weighted_of = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / total as f64
    };
    let accuracy = cm.trace() as f64 / total as f64;
    Ok(MetricsReport {
        accuracy,
        macro_precision: mean_of(|c| c.precision),
        macro_recall: mean_of(|c| c.recall),
        macro_f1: mean_of(|c| c.f1),
        // single-label: micro P = micro R = accuracy
        micro_precision: accuracy,
        micro_recall: accuracy,
        micro_f1: accuracy,
        weighted_precision: weighted_of(|c| c.precision),
        weighted_recall: weighted_of(|c| c.recall),
        weighted_f1: weighted_of(|c| c.f1),
        per_class,
        total,
    })
}

impl MetricsReport {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    /// Headline metrics by name, in a fixed order.
    pub fn summary(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("accuracy", self.accuracy),
            ("macro_precision", self.macro_precision),
            ("macro_recall", self.macro_recall),
            ("macro_f1", self.macro_f1),
            ("weighted_precision", self.weighted_precision),
            ("weighted_recall", self.weighted_recall),
            ("weighted_f1", self.weighted_f1),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table.
    pub fn render_table(&self, class_names: &[String]) -> String {
        let name = |k: usize| {
            class_names
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("class_{k}"))
        };
        let width = (0..self.num_classes())
            .map(|k| name(k).len())
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "", "precision", "recall", "f1", "support"
        );
        for (k, c) in self.per_class.iter().enumerate() {
            let flag = if c.precision_undefined { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.5}  {:>9.5}  {:>9.5}  {:>7}{flag}",
                name(k),
                c.precision,
                c.recall,
                c.f1,
                c.support
            );
        }
        let _ = writeln!(s);
        for (label, p, r, f) in [
            ("macro avg", self.macro_precision, self.macro_recall, self.macro_f1),
            (
                "weighted avg",
                self.weighted_precision,
                self.weighted_recall,
                self.weighted_f1,
            ),
        ] {
            let _ = writeln!(
                s,
                "{label:<width$}  {p:>9.5}  {r:>9.5}  {f:>9.5}  {:>7}",
                self.total
            );
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9.5}  {:>7}",
            "accuracy", "", "", self.accuracy, self.total
        );
        if self.per_class.iter().any(|c| c.precision_undefined) {
            let _ = writeln!(s, "* never predicted; precision reported as 0");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub metrics: BTreeMap<String, MeanStd>,
}

impl AggregateReport {
    pub fn get(&self, metric: &str) -> Option<MeanStd> {
        self.metrics.get(metric).copied()
    }
}

/// Mean and sample standard deviation of every headline metric.
pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<AggregateReport, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewReports(reports.len()));
    }
    let m = reports[0].num_classes();
    if reports.iter().any(|r| r.num_classes() != m) {
        return Err(EvalError::SchemaMismatch);
    }
    let n = reports.len() as f64;
    let mut metrics = BTreeMap::new();
    let names: Vec<&str> = reports[0].summary().iter().map(|(k, _)| *k).collect();
    for (i, name) in names.into_iter().enumerate() {
        let vals: Vec<f64> = reports.iter().map(|r| r.summary()[i].1).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        metrics.insert(
            name.to_string(),
            MeanStd {
                mean,
                std: var.sqrt(),
            },
        );
    }
    Ok(AggregateReport {
        runs: reports.len(),
        metrics,
    })
}
