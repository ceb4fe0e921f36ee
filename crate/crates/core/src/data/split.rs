use rand::seq::SliceRandom;

use crate::rng::{stream, Stream};

use super::{DataError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DataError> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(DataError::InvalidConfig(format!(
                "split fractions must lie in [0, 1], got {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidConfig(format!(
                "split fractions must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// Splits `total` items into parts proportional to `fractions` using
/// largest-remainder rounding. Equal remainders favour the earlier part.
pub fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    // The epsilon keeps 0.8*10 = 7.999… from flooring to 7.
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Stratified train/validation/test split.
///
/// Each class is shuffled with the seeded split stream and cut by
/// largest-remainder counts. Rows keep their original relative order within
/// each output.
pub fn stratified_split(
    ds: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), DataError> {
    fractions.validate()?;
    let labels = ds.require_labels("stratified split input")?;
    let m = ds.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &k) in labels.iter().enumerate() {
        by_class[k].push(i);
    }
    let mut rng = stream(seed, Stream::Split);
    let fr = [fractions.train, fractions.val, fractions.test];
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (k, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let counts = largest_remainder(idx.len(), &fr);
        let wanted = fr.iter().filter(|&&f| f > 0.0).count();
        if idx.len() < wanted {
            log::warn!(
                "class {k} has {} rows, fewer than the {wanted} non-empty splits; train is filled first",
                idx.len()
            );
        }
        let mut start = 0;
        for (part, c) in parts.iter_mut().zip(counts) {
            part.extend_from_slice(&idx[start..start + c]);
            start += c;
        }
    }
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    let [a, b, c] = parts;
    Ok((ds.select(&a), ds.select(&b), ds.select(&c)))
}
