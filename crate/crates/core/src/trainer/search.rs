use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::train::{train, TrainedModel};
use crate::error::{Error, Result};
use crate::features::LabeledDataset;
use crate::rng;

/// Candidate values for each searched hyperparameter. Hidden layers within a
/// network share one width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchGrid {
    pub classifier_layers: Vec<usize>,
    pub classifier_widths: Vec<usize>,
    pub discriminator_layers: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    pub classifier_lrs: Vec<f64>,
    pub discriminator_lrs: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub classifier_layer_norm: Vec<bool>,
    pub discriminator_layer_norm: Vec<bool>,
    pub discriminator_spectral_norm: Vec<bool>,
    pub n_trials: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            classifier_layers: vec![1, 2, 3],
            classifier_widths: vec![32, 64, 128, 256],
            discriminator_layers: vec![1, 2, 3],
            discriminator_widths: vec![16, 32, 64],
            classifier_lrs: vec![1e-4, 3e-4, 1e-3],
            discriminator_lrs: vec![1e-4, 3e-4, 1e-3],
            lambdas: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            classifier_layer_norm: vec![false, true],
            discriminator_layer_norm: vec![false, true],
            discriminator_spectral_norm: vec![false, true],
            n_trials: 100,
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDraw {
    pub classifier_layers: usize,
    pub classifier_width: usize,
    pub discriminator_layers: usize,
    pub discriminator_width: usize,
    pub classifier_lr: f64,
    pub discriminator_lr: f64,
    pub lambda: f64,
    pub classifier_layer_norm: bool,
    pub discriminator_layer_norm: bool,
    pub discriminator_spectral_norm: bool,
}

fn pick<T: Copy, R: Rng + ?Sized>(set: &[T], rng: &mut R) -> T {
    set[rng.random_range(0..set.len())]
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("classifier_layers", self.classifier_layers.len()),
            ("classifier_widths", self.classifier_widths.len()),
            ("discriminator_layers", self.discriminator_layers.len()),
            ("discriminator_widths", self.discriminator_widths.len()),
            ("classifier_lrs", self.classifier_lrs.len()),
            ("discriminator_lrs", self.discriminator_lrs.len()),
            ("lambdas", self.lambdas.len()),
            ("classifier_layer_norm", self.classifier_layer_norm.len()),
            ("discriminator_layer_norm", self.discriminator_layer_norm.len()),
            ("discriminator_spectral_norm", self.discriminator_spectral_norm.len()),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::validation(*name, "candidate set is empty"));
        }
        if self.classifier_widths.contains(&0) || self.discriminator_widths.contains(&0) {
            return Err(Error::validation("widths", "must be positive"));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> GridDraw {
        GridDraw {
            classifier_layers: pick(&self.classifier_layers, rng),
            classifier_width: pick(&self.classifier_widths, rng),
            discriminator_layers: pick(&self.discriminator_layers, rng),
            discriminator_width: pick(&self.discriminator_widths, rng),
            classifier_lr: pick(&self.classifier_lrs, rng),
            discriminator_lr: pick(&self.discriminator_lrs, rng),
            lambda: pick(&self.lambdas, rng),
            classifier_layer_norm: pick(&self.classifier_layer_norm, rng),
            discriminator_layer_norm: pick(&self.discriminator_layer_norm, rng),
            discriminator_spectral_norm: pick(&self.discriminator_spectral_norm, rng),
        }
    }
}

impl GridDraw {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            classifier_hidden: vec![self.classifier_width; self.classifier_layers],
            classifier_layer_norm: self.classifier_layer_norm,
            discriminator_hidden: vec![self.discriminator_width; self.discriminator_layers],
            discriminator_layer_norm: self.discriminator_layer_norm,
            discriminator_spectral_norm: self.discriminator_spectral_norm,
            lambda: self.lambda,
            classifier_lr: self.classifier_lr,
            discriminator_lr: self.discriminator_lr,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub draw: GridDraw,
    pub config: TrainConfig,
    /// The trained model, or the error message of a failed trial.
    pub outcome: std::result::Result<TrainedModel, String>,
}

impl TrialResult {
    fn selected_record(&self) -> Option<&super::train::EpochRecord> {
        let m = self.outcome.as_ref().ok()?;
        m.trace.iter().find(|r| r.epoch == m.selected_epoch)
    }

    pub fn val_auc(&self) -> Option<f64> {
        self.selected_record().map(|r| r.val_auc)
    }

    pub fn val_alignment(&self) -> Option<f64> {
        self.selected_record().and_then(|r| r.val_alignment)
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// In trial order.
    pub trials: Vec<TrialResult>,
    /// Trial indices, best first; failed trials last.
    pub ranking: Vec<usize>,
}

/// Independent uniform draws from the grid, each trained with its own seed.
/// Standard trials rank by validation AUC-ROC, adversarial ones by alignment.
pub fn random_search(grid: &SearchGrid, dataset: &LabeledDataset, base: &TrainConfig, seed: u64) -> Result<SearchResult> {
    grid.validate()?;
    let trials: Vec<TrialResult> = (0..grid.n_trials)
        .into_par_iter()
        .map(|trial| {
            let draw = grid.draw(&mut rng::substream(seed, "search-draw", trial as u64));
            let mut config = draw.apply(base);
            config.seed = rng::derive_seed(seed, "search-trial", trial as u64);
            let outcome = train(dataset, &config).map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("trial {trial} failed: {e}");
            }
            TrialResult { trial, draw, config, outcome }
        })
        .collect();

    let eq = base.sensitive_attribute.attribute().is_some();
    let key = |t: &TrialResult| -> Option<f64> {
        if eq {
            t.val_alignment()
        } else {
            t.val_auc().map(|a| -a)
        }
    };
    let mut ranking: Vec<usize> = (0..trials.len()).collect();
    ranking.sort_by(|&a, &b| match (key(&trials[a]), key(&trials[b])) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    Ok(SearchResult { trials, ranking })
}

impl SearchResult {
    /// `trial,params...,val_auc,val_alignment,selected,status` in ranking order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "trial,classifier_layers,classifier_width,discriminator_layers,discriminator_width,classifier_lr,discriminator_lr,lambda,classifier_layer_norm,discriminator_layer_norm,discriminator_spectral_norm,val_auc,val_alignment,selected,status\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10}"));
        for (rank, &i) in self.ranking.iter().enumerate() {
            let t = &self.trials[i];
            let d = &t.draw;
            let status = match &t.outcome {
                Ok(_) => "ok".to_string(),
                Err(e) => format!("\"failed: {}\"", e.replace('"', "'")),
            };
            let selected = rank == 0 && t.outcome.is_ok();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t.trial,
                d.classifier_layers,
                d.classifier_width,
                d.discriminator_layers,
                d.discriminator_width,
                d.classifier_lr,
                d.discriminator_lr,
                d.lambda,
                d.classifier_layer_norm,
                d.discriminator_layer_norm,
                d.discriminator_spectral_norm,
                opt(t.val_auc()),
                opt(t.val_alignment()),
                selected,
                status
            );
        }
        out
    }
}
