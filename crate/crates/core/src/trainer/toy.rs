use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cohort::{GroupAssignment, SplitTag};
use crate::features::{CsrMatrix, LabeledDataset};
use crate::neural::sigmoid;
use crate::rng;

/// Small binary-feature dataset with a planted logistic rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Probability that a feature is on.
    pub density: f64,
    /// Added to the gender-1 logit; produces group-dependent score distributions.
    pub group_shift: f64,
    /// Scales the planted weights. Large values make labels nearly deterministic.
    pub signal: f64,
    /// Labels are `score > 0` instead of Bernoulli draws.
    pub separable: bool,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { n_rows: 2000, n_cols: 50, density: 0.2, group_shift: 0.0, signal: 1.0, separable: false, seed: 0 }
    }
}

/// Rows cycle through train (8 of 10), val and test.
pub fn toy_dataset(cfg: &ToyConfig) -> LabeledDataset {
    let mut r = rng::stream(cfg.seed, "toy");
    let weights: Vec<f64> = (0..cfg.n_cols)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut r);
            w * cfg.signal
        })
        .collect();
    let mut rows = Vec::with_capacity(cfg.n_rows);
    let mut labels = Vec::with_capacity(cfg.n_rows);
    let mut groups = Vec::with_capacity(cfg.n_rows);
    let mut splits = Vec::with_capacity(cfg.n_rows);
    for i in 0..cfg.n_rows {
        let gender = r.random_range(0..2);
        let mut x = vec![0.0; cfg.n_cols];
        let mut score = if gender == 1 { cfg.group_shift } else { 0.0 };
        for (j, w) in weights.iter().enumerate() {
            if r.random::<f64>() < cfg.density {
                x[j] = 1.0;
                score += w;
            }
        }
        // center so both classes appear
        score -= cfg.density * weights.iter().sum::<f64>();
        let y = if cfg.separable { (score > 0.0) as u8 } else { (r.random::<f64>() < sigmoid(score)) as u8 };
        rows.push(x);
        labels.push(y);
        groups.push(GroupAssignment { race_group: r.random_range(0..6), gender_group: gender, age_group: r.random_range(0..4) });
        splits.push(match i % 10 {
            8 => SplitTag::Val,
            9 => SplitTag::Test,
            _ => SplitTag::Train,
        });
    }
    LabeledDataset {
        features: CsrMatrix::from_dense(&rows),
        labels,
        groups,
        splits,
        row_ids: (0..cfg.n_rows).map(|i| format!("toy{i:06}")).collect(),
    }
}
