//! Fairness-constrained risk prediction on sparse binary clinical features.
//!
//! The crate covers the whole pipeline: synthetic cohort generation and
//! extraction ([`cohort`]), binary concept features ([`features`]), a small
//! fully-connected network toolkit ([`neural`]), evaluation and fairness
//! metrics ([`metrics`]), and standard/adversarial training with model
//! selection and random search ([`trainer`]).

pub mod cohort;
pub mod error;
pub mod features;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
