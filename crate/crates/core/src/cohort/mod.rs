//! Synthetic patient records and cohort-extraction rules.

pub mod codes;
pub mod extract;
pub mod generate;
pub mod io;
pub mod split;
pub mod types;

pub use codes::{CodeList, CohortCodes, MatchMode};
pub use extract::{
    apply_exclusions, assign_groups, eligible_index_dates, extract_cohort, label_outcome, select_index_time,
    ExtractedPatient, Extraction, Funnel,
};
pub use generate::{generate_synthetic_cohort, CohortGenerator, PerAttribute, SyntheticCohortConfig};
pub use split::{split_cohort, SplitTag, Splits, DEFAULT_RATIOS};
pub use types::{
    age_group_of, age_in_years, Attribute, ClinicalEvent, Domain, Gender, GroupAssignment, IndexedPatient,
    PatientRecord, Race, AGE_GROUP_NAMES,
};
