use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::cohort::{Attribute, SplitTag};
use crate::error::{Error, Result};
use crate::features::LabeledDataset;
use crate::metrics::{alignment_score, auc_roc, fairness_report, FairnessReport, ScoredExample};
use crate::neural::ops::{bce_logit_grad, ce_logit_grad};
use crate::neural::{
    adam_step, binary_cross_entropy, multiclass_cross_entropy, AdamState, ForwardCache, Input, Network,
    NetworkParams,
};
use crate::rng;

/// Validation summary recorded after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub val_auc: f64,
    /// Mean of the two stratum-level mean pairwise EMDs (adversarial arm only).
    pub val_alignment: Option<f64>,
    pub train_loss: f64,
    pub adversary_loss: Option<f64>,
    pub params_digest: u64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub config: TrainConfig,
    pub trace: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub selected_epoch: usize,
    pub validation_report: FairnessReport,
    pub batches_consumed: usize,
}

impl TrainedModel {
    /// Structured text: config, trace, selection and validation metrics.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "arm = {}", self.config.sensitive_attribute.arm_name());
        let _ = writeln!(out, "seed = {}", self.config.seed);
        for line in self.config.manifest_lines() {
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "batches_consumed = {}", self.batches_consumed);
        let _ = writeln!(out, "epochs_completed = {}", self.trace.len());
        for r in &self.trace {
            let _ = writeln!(
                out,
                "trace.{:04} = val_auc={:.10} val_alignment={} train_loss={:.10} adversary_loss={} digest={:016x}",
                r.epoch,
                r.val_auc,
                r.val_alignment.map_or("none".to_string(), |v| format!("{v:.10}")),
                r.train_loss,
                r.adversary_loss.map_or("none".to_string(), |v| format!("{v:.10}")),
                r.params_digest
            );
        }
        let _ = writeln!(out, "selected_epoch = {}", self.selected_epoch);
        let _ = writeln!(out, "params_digest = {:016x}", self.params.digest());
        for line in self.validation_report.to_text().lines() {
            let _ = writeln!(out, "validation.{line}");
        }
        out
    }
}

/// Row indices drawn uniformly with replacement from `pool`.
pub fn sample_batch<R: Rng + ?Sized>(pool: &[usize], batch_size: usize, rng: &mut R) -> Vec<usize> {
    assert!(!pool.is_empty(), "cannot sample from an empty pool");
    (0..batch_size).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

/// Classifier probabilities for the given rows.
pub fn predict(params: &NetworkParams, dataset: &LabeledDataset, rows: &[usize]) -> Result<Vec<f64>> {
    if params.spec.input_dim != dataset.n_cols() {
        return Err(Error::validation(
            "checkpoint",
            format!("network expects {} features, dataset has {}", params.spec.input_dim, dataset.n_cols()),
        ));
    }
    let net = Network::new(params);
    rows.par_iter()
        .map(|&r| {
            let (indices, values) = dataset.features.row(r);
            Ok(net.forward(Input::Sparse { indices, values })?.output[0])
        })
        .collect()
}

/// Fairness report for one split over all attributes.
pub fn evaluate(params: &NetworkParams, dataset: &LabeledDataset, split: SplitTag, threshold: f64) -> Result<FairnessReport> {
    let rows = dataset.rows_in(split);
    if rows.is_empty() {
        return Err(Error::validation("split", format!("{split} split is empty")));
    }
    let scores = predict(params, dataset, &rows)?;
    let examples: Vec<ScoredExample> = rows
        .iter()
        .zip(&scores)
        .map(|(&r, &score)| ScoredExample { score, label: dataset.labels[r], groups: dataset.groups[r] })
        .collect();
    fairness_report(&examples, &Attribute::ALL, threshold)
}

/// Among epochs with validation AUC-ROC above `auc_floor`, the one with the
/// smallest alignment score (earliest on ties). Returns an index into `trace`.
pub fn select_eq_model(trace: &[EpochRecord], auc_floor: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in trace.iter().enumerate() {
        let Some(a) = r.val_alignment else { continue };
        if r.val_auc > auc_floor && best.is_none_or(|(_, b)| a < b) {
            best = Some((i, a));
        }
    }
    match best {
        Some((i, _)) => Ok(i),
        None => {
            let (best_epoch, best_auc) = trace
                .iter()
                .fold((0, f64::NAN), |acc, r| if acc.1.is_nan() || r.val_auc > acc.1 { (r.epoch, r.val_auc) } else { acc });
            Err(Error::SelectionFailed { floor: auc_floor, best_epoch, best_auc })
        }
    }
}

struct Validation {
    rows: Vec<usize>,
    labels: Vec<u8>,
    groups: Option<(Vec<usize>, usize)>,
}

impl Validation {
    fn new(dataset: &LabeledDataset, attribute: Option<Attribute>) -> Result<Self> {
        let rows = dataset.rows_in(SplitTag::Val);
        let labels: Vec<u8> = rows.iter().map(|&r| dataset.labels[r]).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            return Err(Error::validation("dataset", "validation split needs both outcome classes"));
        }
        let groups = attribute.map(|a| (rows.iter().map(|&r| dataset.group(r, a)).collect(), a.group_count()));
        Ok(Validation { rows, labels, groups })
    }

    fn score(&self, params: &NetworkParams, dataset: &LabeledDataset) -> Result<(f64, Option<f64>)> {
        let scores = predict(params, dataset, &self.rows)?;
        let auc = auc_roc(&scores, &self.labels)?;
        let alignment = self
            .groups
            .as_ref()
            .and_then(|(g, k)| alignment_score(&scores, &self.labels, g, *k));
        Ok((auc, alignment))
    }
}

struct Adversary {
    attribute: Attribute,
    params: NetworkParams,
    adam: AdamState,
}

/// Both arms share this loop; the classifier init and batch streams do not
/// depend on whether an adversary exists.
fn run(dataset: &LabeledDataset, config: &TrainConfig, attribute: Option<Attribute>) -> Result<(Vec<EpochRecord>, Option<(usize, NetworkParams)>, usize)> {
    config.validate()?;
    dataset.validate()?;
    let train_rows = dataset.rows_in(SplitTag::Train);
    if train_rows.is_empty() {
        return Err(Error::validation("dataset", "training split is empty"));
    }
    let validation = Validation::new(dataset, attribute)?;
    let seed = config.seed;
    let mut clf = NetworkParams::init(&config.classifier_spec(dataset.n_cols()), &mut rng::substream(seed, "classifier-init", 0))?;
    let mut adam_f = AdamState::new(&clf, config.classifier_lr);
    let mut adversary = match attribute {
        None => None,
        Some(a) => {
            let k = a.group_count();
            if let Some(&r) = train_rows.iter().find(|&&r| dataset.group(r, a) >= k) {
                return Err(Error::validation(
                    "discriminator",
                    format!("row {r} has {} group {} but the discriminator predicts {k} groups", a.name(), dataset.group(r, a)),
                ));
            }
            let params = NetworkParams::init(&config.discriminator_spec(a), &mut rng::substream(seed, "discriminator-init", 0))?;
            let adam = AdamState::new(&params, config.discriminator_lr);
            Some(Adversary { attribute: a, params, adam })
        }
    };
    let mut batch_rng = rng::substream(seed, "batches", 0);

    let b = config.batch_size;
    let inv_b = 1.0 / b as f64;
    let mut caches: Vec<ForwardCache> = vec![ForwardCache::default(); b];
    let mut disc_cache = ForwardCache::default();
    let mut dz = vec![0.0; b];
    let mut trace = Vec::with_capacity(config.epochs);
    let mut snapshot: Option<(usize, NetworkParams)> = None;
    let mut batches = 0;
    let mut recent_losses: Vec<f64> = Vec::new();

    for epoch in 1..=config.epochs {
        let (mut loss_sum, mut adv_sum) = (0.0, 0.0);
        for batch in 0..config.batches_per_epoch {
            let rows = sample_batch(&train_rows, b, &mut batch_rng);
            let net = Network::new(&clf);
            let mut cls_loss = 0.0;
            for (cache, &r) in caches.iter_mut().zip(&rows) {
                let (indices, values) = dataset.features.row(r);
                net.forward_into(Input::Sparse { indices, values }, cache)?;
                cls_loss += binary_cross_entropy(cache.output[0], dataset.labels[r]);
            }
            cls_loss *= inv_b;
            if !cls_loss.is_finite() {
                return Err(Error::numeric(
                    format!("epoch {epoch} batch {batch}"),
                    format!("classifier loss {cls_loss}; recent epoch losses {recent_losses:?}"),
                ));
            }

            dz.iter_mut().for_each(|d| *d = 0.0);
            if let Some(adv) = &mut adversary {
                let a = adv.attribute;
                adv.params.power_iterate();
                if config.discriminator_updates {
                    let dnet = Network::new(&adv.params);
                    let mut grads = adv.params.zero_grads();
                    for (cache, &r) in caches.iter().zip(&rows) {
                        let x = [cache.logits[0], f64::from(dataset.labels[r])];
                        dnet.forward_into(Input::Dense(&x), &mut disc_cache)?;
                        let mut g = ce_logit_grad(&disc_cache.output, dataset.group(r, a));
                        g.iter_mut().for_each(|v| *v *= inv_b);
                        dnet.backward(&disc_cache, &g, &mut grads)?;
                    }
                    dnet.finish_gradients(&mut grads);
                    adam_step(&mut adv.adam, &mut adv.params, &grads)?;
                }
                // classifier step sees the updated, then frozen, discriminator
                let dnet = Network::new(&adv.params);
                let mut scratch = adv.params.zero_grads();
                let mut adv_loss = 0.0;
                for ((cache, &r), d) in caches.iter().zip(&rows).zip(dz.iter_mut()) {
                    let x = [cache.logits[0], f64::from(dataset.labels[r])];
                    dnet.forward_into(Input::Dense(&x), &mut disc_cache)?;
                    let z = dataset.group(r, a);
                    adv_loss += multiclass_cross_entropy(&disc_cache.output, z);
                    let mut g = ce_logit_grad(&disc_cache.output, z);
                    g.iter_mut().for_each(|v| *v *= inv_b);
                    *d = dnet.backward(&disc_cache, &g, &mut scratch)?[0];
                }
                adv_sum += adv_loss * inv_b;
            }

            let mut grads = clf.zero_grads();
            for ((cache, &r), &d) in caches.iter().zip(&rows).zip(&dz) {
                let dlogit = bce_logit_grad(cache.output[0], dataset.labels[r]) * inv_b - config.lambda * d;
                net.backward(cache, &[dlogit], &mut grads)?;
            }
            net.finish_gradients(&mut grads);
            drop(net);
            adam_step(&mut adam_f, &mut clf, &grads)?;
            loss_sum += cls_loss;
            batches += 1;
        }
        let train_loss = loss_sum / config.batches_per_epoch as f64;
        recent_losses.push(train_loss);
        if recent_losses.len() > 5 {
            recent_losses.remove(0);
        }
        let (val_auc, val_alignment) = validation.score(&clf, dataset)?;
        trace.push(EpochRecord {
            epoch,
            val_auc,
            val_alignment,
            train_loss,
            adversary_loss: adversary.as_ref().map(|_| adv_sum / config.batches_per_epoch as f64),
            params_digest: clf.digest(),
        });
        log::debug!("epoch {epoch}: val_auc {val_auc:.4} alignment {val_alignment:?} loss {train_loss:.5}");
        keep_if_best(&mut snapshot, &trace, &clf, attribute.is_some(), config.eq_auc_floor);
    }
    if config.epochs == 0 {
        snapshot = Some((0, clf));
    }
    Ok((trace, snapshot, batches))
}

/// Keeps the best-so-far checkpoint under the arm's selection rule. The
/// selected epoch over a growing trace either stays put or moves to the newest
/// epoch, so one slot is enough.
fn keep_if_best(snapshot: &mut Option<(usize, NetworkParams)>, trace: &[EpochRecord], params: &NetworkParams, eq: bool, floor: f64) {
    let cur = trace.last().expect("trace is non-empty");
    let is_best = if eq {
        select_eq_model(trace, floor).is_ok_and(|i| trace[i].epoch == cur.epoch)
    } else {
        snapshot.as_ref().is_none_or(|(e, _)| cur.val_auc > trace[*e - 1].val_auc)
    };
    if is_best {
        *snapshot = Some((cur.epoch, params.clone()));
    }
}

fn finish(dataset: &LabeledDataset, config: &TrainConfig, trace: Vec<EpochRecord>, selected_epoch: usize, params: NetworkParams, batches: usize) -> Result<TrainedModel> {
    let validation_report = evaluate(&params, dataset, SplitTag::Val, config.threshold)?;
    Ok(TrainedModel { params, config: config.clone(), trace, selected_epoch, validation_report, batches_consumed: batches })
}

/// Classifier-only training; keeps the epoch with the highest validation AUC-ROC.
pub fn train_standard(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainedModel> {
    if config.sensitive_attribute.attribute().is_some() {
        return Err(Error::validation("sensitive_attribute", "standard training requires `none`"));
    }
    let (trace, snapshot, batches) = run(dataset, config, None)?;
    let (epoch, params) = snapshot.expect("standard run keeps a checkpoint");
    finish(dataset, config, trace, epoch, params, batches)
}

/// Alternating adversarial training for equality of odds, with model selection
/// by validation alignment among epochs above the AUC floor.
pub fn train_adversarial(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainedModel> {
    let Some(attribute) = config.sensitive_attribute.attribute() else {
        return Err(Error::validation("sensitive_attribute", "adversarial training needs an attribute"));
    };
    if config.lambda <= 0.0 && config.discriminator_updates {
        return Err(Error::validation("lambda", "must be positive for adversarial training"));
    }
    if config.epochs == 0 {
        return Err(Error::validation("epochs", "adversarial training needs at least one epoch to select from"));
    }
    let (trace, snapshot, batches) = run(dataset, config, Some(attribute))?;
    let epoch = trace[select_eq_model(&trace, config.eq_auc_floor)?].epoch;
    let (kept, params) = snapshot.expect("a selectable epoch was kept");
    debug_assert_eq!(kept, epoch);
    finish(dataset, config, trace, epoch, params, batches)
}

/// Dispatch on `config.sensitive_attribute`.
pub fn train(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainedModel> {
    match config.sensitive_attribute.attribute() {
        None => train_standard(dataset, config),
        Some(_) => train_adversarial(dataset, config),
    }
}
