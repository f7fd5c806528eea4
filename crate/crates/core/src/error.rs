use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input value is outside its documented domain.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// A caller broke an operation's precondition (shape mismatch, stale cache, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A non-finite value showed up during numeric work.
    #[error("numeric error in {location}: {detail}")]
    Numeric { location: String, detail: String },

    /// The metric has no value for this input (e.g. single-class AUC).
    #[error("undefined metric {metric}: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    /// No epoch met the EQ model-selection floor.
    #[error("model selection failed: no epoch exceeded validation AUC-ROC {floor} (best {best_auc:.4} at epoch {best_epoch})")]
    SelectionFailed {
        floor: f64,
        best_epoch: usize,
        best_auc: f64,
    },

    #[error("parse error in {path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn numeric(location: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
            detail: detail.into(),
        }
    }

    pub fn undefined(metric: &'static str, reason: impl Into<String>) -> Self {
        Error::UndefinedMetric {
            metric,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
