//! Evaluation metrics and the per-group fairness report.

mod report;
mod scores;

pub use report::{
    fairness_report, table2_csv, table3_csv, table4_csv, AttributeMetrics, Confusion, FairnessReport,
    GroupMetrics, Histogram, PopulationMetrics, ScoredExample,
};
pub use scores::{
    alignment_score, auc_prc, auc_roc, brier, coefficient_of_variation, confusion_at, cv_of_rates,
    demographic_parity_gap, emd_1d, emd_sorted, histogram, mean_pairwise_emd, ConfusionAtThreshold,
    DEFAULT_THRESHOLD, HISTOGRAM_BINS,
};

#[cfg(test)]
mod tests;
