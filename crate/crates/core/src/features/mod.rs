//! Binary concept features from pre-index patient history.

pub mod dataset;
pub mod extract;
pub mod matrix;
pub mod vocab;

pub use dataset::{prepare_dataset, LabeledDataset, PreparedCohort};
pub use extract::{extract_features, FeatureRow};
pub use matrix::{CsrMatrix, NumericColumn, SparseFeatureMatrix};
pub use vocab::{build_vocabulary, Concept, DemographicBlock, Vocabulary};

#[cfg(test)]
mod tests;
