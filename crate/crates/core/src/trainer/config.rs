use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::Attribute;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::neural::NetworkSpec;

/// Which attribute the adversary targets; `None` selects standard training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitiveAttribute {
    #[default]
    None,
    Race,
    Gender,
    Age,
}

impl SensitiveAttribute {
    pub fn attribute(self) -> Option<Attribute> {
        match self {
            SensitiveAttribute::None => None,
            SensitiveAttribute::Race => Some(Attribute::Race),
            SensitiveAttribute::Gender => Some(Attribute::Gender),
            SensitiveAttribute::Age => Some(Attribute::Age),
        }
    }

    /// Experiment label: `Standard`, `EQ_race`, ...
    pub fn arm_name(self) -> String {
        match self.attribute() {
            None => "Standard".to_string(),
            Some(a) => format!("EQ_{}", a.name()),
        }
    }
}

impl From<Option<Attribute>> for SensitiveAttribute {
    fn from(a: Option<Attribute>) -> Self {
        match a {
            None => SensitiveAttribute::None,
            Some(Attribute::Race) => SensitiveAttribute::Race,
            Some(Attribute::Gender) => SensitiveAttribute::Gender,
            Some(Attribute::Age) => SensitiveAttribute::Age,
        }
    }
}

impl fmt::Display for SensitiveAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.attribute().map_or("none", |a| a.name()))
    }
}

impl FromStr for SensitiveAttribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(SensitiveAttribute::None);
        }
        Attribute::parse(s)
            .map(|a| Some(a).into())
            .ok_or_else(|| Error::validation("sensitive_attribute", format!("unknown attribute {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub classifier_hidden: Vec<usize>,
    pub classifier_layer_norm: bool,
    pub discriminator_hidden: Vec<usize>,
    pub discriminator_layer_norm: bool,
    pub discriminator_spectral_norm: bool,
    /// Weight of the adversary's loss in the classifier objective.
    pub lambda: f64,
    pub classifier_lr: f64,
    pub discriminator_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub sensitive_attribute: SensitiveAttribute,
    pub seed: u64,
    pub eq_auc_floor: f64,
    pub threshold: f64,
    /// Set to false to freeze the discriminator (used to check that the
    /// adversarial loop reduces to standard training).
    pub discriminator_updates: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            classifier_hidden: vec![64],
            classifier_layer_norm: false,
            discriminator_hidden: vec![32],
            discriminator_layer_norm: false,
            discriminator_spectral_norm: true,
            lambda: 1.0,
            classifier_lr: 1e-3,
            discriminator_lr: 1e-3,
            batch_size: 256,
            epochs: 100,
            batches_per_epoch: 100,
            sensitive_attribute: SensitiveAttribute::None,
            seed: 0,
            eq_auc_floor: 0.7,
            threshold: DEFAULT_THRESHOLD,
            discriminator_updates: true,
        }
    }
}

impl TrainConfig {
    /// Settings used for the desk-scale Standard vs EQ comparison.
    pub fn desk_benchmark() -> Self {
        TrainConfig {
            classifier_hidden: vec![64],
            discriminator_hidden: vec![32],
            discriminator_spectral_norm: true,
            lambda: 1.0,
            classifier_lr: 3e-4,
            eq_auc_floor: 0.75,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be a positive finite number, got {v}")))
            }
        };
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::validation("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        positive("classifier_lr", self.classifier_lr)?;
        positive("discriminator_lr", self.discriminator_lr)?;
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be positive"));
        }
        if self.batches_per_epoch == 0 {
            return Err(Error::validation("batches_per_epoch", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.eq_auc_floor) {
            return Err(Error::validation("eq_auc_floor", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::validation("threshold", "must lie in [0, 1]"));
        }
        for (name, hidden) in [("classifier_hidden", &self.classifier_hidden), ("discriminator_hidden", &self.discriminator_hidden)] {
            if hidden.contains(&0) {
                return Err(Error::validation(name, "layer widths must be positive"));
            }
        }
        Ok(())
    }

    pub fn classifier_spec(&self, input_dim: usize) -> NetworkSpec {
        NetworkSpec {
            input_dim,
            hidden_layers: self.classifier_hidden.clone(),
            output_dim: 1,
            layer_norm: self.classifier_layer_norm,
            spectral_norm: false,
        }
    }

    /// Input is `(logit, y)`; output is a distribution over the attribute's groups.
    pub fn discriminator_spec(&self, attribute: Attribute) -> NetworkSpec {
        NetworkSpec {
            input_dim: 2,
            hidden_layers: self.discriminator_hidden.clone(),
            output_dim: attribute.group_count(),
            layer_norm: self.discriminator_layer_norm,
            spectral_norm: self.discriminator_spectral_norm,
        }
    }

    /// `key = value` lines with a stable key order.
    pub fn manifest_lines(&self) -> Vec<String> {
        let value = serde_json::to_value(self).expect("config serializes");
        let map = value.as_object().expect("config is an object");
        map.iter().map(|(k, v)| format!("config.{k} = {v}")).collect()
    }
}
