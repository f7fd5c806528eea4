//! Standard and adversarial training, model selection and random search.

mod config;
mod search;
mod toy;
mod train;

pub use config::{SensitiveAttribute, TrainConfig};
pub use search::{random_search, GridDraw, SearchGrid, SearchResult, TrialResult};
pub use toy::{toy_dataset, ToyConfig};
pub use train::{
    evaluate, predict, sample_batch, select_eq_model, train, train_adversarial, train_standard, EpochRecord,
    TrainedModel,
};
