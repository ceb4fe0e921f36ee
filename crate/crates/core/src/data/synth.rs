use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::rng::{stream, Stream};

use super::split::largest_remainder;
use super::{DataError, Dataset, DatasetSchema};

/// Gaussian-cluster generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_features: usize,
    pub num_classes: usize,
    /// Total rows, spread evenly over classes.
    pub num_samples: usize,
    /// Share of rows that keep their label; the rest form the unlabeled pool.
    pub labeled_fraction: f64,
    /// Distance of each class mean from the origin.
    pub separation: f64,
    pub noise_std: f64,
    /// Share of *labeled* rows whose label is flipped to another class.
    pub label_noise_rate: f64,
    pub directions: MeanDirections,
    pub seed: u64,
}

/// How class-mean directions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanDirections {
    /// Class `k` moves along coordinate axis `k` (random unit vectors once
    /// classes outnumber features).
    #[default]
    Axis,
    /// Uniformly random unit vectors.
    Random,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_features: 39,
            num_classes: 9,
            num_samples: 20_000,
            labeled_fraction: 0.1,
            separation: 2.5,
            noise_std: 1.0,
            label_noise_rate: 0.0,
            directions: MeanDirections::Axis,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        if self.num_features < 1 || self.num_samples < 1 {
            return bad("num_features and num_samples must be >= 1".into());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be >= 2, got {}", self.num_classes));
        }
        for (name, v) in [
            ("labeled_fraction", self.labeled_fraction),
            ("label_noise_rate", self.label_noise_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return bad(format!("separation must be finite and >= 0, got {}", self.separation));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be finite and > 0, got {}", self.noise_std));
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<DatasetSchema, DataError> {
        let default = DatasetSchema::default();
        if self.num_features == default.num_features() && self.num_classes == default.num_classes() {
            Ok(default)
        } else {
            DatasetSchema::generic(self.num_features, self.num_classes)
        }
    }
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub labeled: Dataset,
    pub unlabeled: Dataset,
    /// Generating class of every unlabeled row, for evaluation only.
    pub hidden_truth: Vec<usize>,
}

/// Draws class-conditional Gaussian clusters.
///
/// Class `k` has mean `separation · u_k` for a unit vector `u_k` (see
/// [`MeanDirections`]), and rows are `mean + noise_std · N(0, I)`. A seeded shuffle decides which rows
/// keep labels.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData, DataError> {
    cfg.validate()?;
    let schema = Arc::new(cfg.schema()?);
    let (f, m) = (cfg.num_features, cfg.num_classes);
    let mut rng = stream(cfg.seed, Stream::Synthetic);

    let means: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            if cfg.directions == MeanDirections::Axis && k < f {
                let mut u = vec![0.0; f];
                u[k] = cfg.separation;
                return u;
            }
            let mut u: Vec<f64> = (0..f).map(|_| rng.sample(StandardNormal)).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            u.iter_mut().for_each(|v| *v *= cfg.separation / norm);
            u
        })
        .collect();

    let per_class = largest_remainder(cfg.num_samples, &vec![1.0 / m as f64; m]);
    let classes: Vec<usize> = per_class
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
        .collect();
    let n = classes.len();
    let mut data = Vec::with_capacity(n * f);
    for &k in &classes {
        for mu in &means[k] {
            let z: f64 = rng.sample(StandardNormal);
            data.push(mu + cfg.noise_std * z);
        }
    }
    let rows = Matrix::from_vec(n, f, data).expect("sized n*f");

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_lab = ((cfg.labeled_fraction * n as f64).round() as usize).min(n);
    let (lab_idx, unl_idx) = order.split_at(n_lab);

    let mut lab_labels: Vec<usize> = lab_idx.iter().map(|&i| classes[i]).collect();
    if cfg.label_noise_rate > 0.0 {
        for y in lab_labels.iter_mut() {
            if rng.random::<f64>() < cfg.label_noise_rate {
                let shift = rng.random_range(1..m);
                *y = (*y + shift) % m;
            }
        }
    }

    let labeled = Dataset::new(schema.clone(), rows.select_rows(lab_idx), Some(lab_labels))?;
    let unlabeled = Dataset::new(schema, rows.select_rows(unl_idx), None)?;
    let hidden_truth = unl_idx.iter().map(|&i| classes[i]).collect();
    Ok(SyntheticData {
        labeled,
        unlabeled,
        hidden_truth,
    })
}

/// Replaces a `rate` share of labels with a different, uniformly chosen class.
pub fn corrupt_labels<R: Rng>(labels: &mut [usize], num_classes: usize, rate: f64, rng: &mut R) {
    for y in labels.iter_mut() {
        if rng.random::<f64>() < rate {
            *y = (*y + rng.random_range(1..num_classes)) % num_classes;
        }
    }
}
