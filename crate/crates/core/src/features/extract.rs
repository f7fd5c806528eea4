use crate::cohort::IndexedPatient;

use super::vocab::Vocabulary;

/// One patient's feature row: sorted binary columns plus the numeric age entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub binary: Vec<u32>,
    pub numeric: Vec<(u32, f64)>,
}

impl FeatureRow {
    /// Column/value pairs in column order.
    pub fn entries(&self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = self.binary.iter().map(|&c| (c, 1.0)).collect();
        out.extend(self.numeric.iter().copied());
        out.sort_by_key(|e| e.0);
        out
    }
}

/// Presence of each known concept strictly before the index time, plus demographics.
///
/// Lab and vital values are ignored; only the presence of the measurement counts.
/// Concepts outside the vocabulary are dropped.
pub fn extract_features(ip: &IndexedPatient, vocab: &Vocabulary) -> FeatureRow {
    let mut binary: Vec<u32> = ip
        .patient
        .events
        .iter()
        .filter(|e| e.date < ip.index_time)
        .filter_map(|e| vocab.column(e.domain, e.code.trim()))
        .collect();
    let mut numeric = Vec::new();
    if let Some(d) = vocab.demographics() {
        binary.push(d.race_col(ip.patient.race));
        binary.push(d.gender_col(ip.patient.gender));
        numeric.push((d.age_col(), d.standardize_age(f64::from(ip.age_at_index()))));
    }
    binary.sort_unstable();
    binary.dedup();
    FeatureRow { binary, numeric }
}
