use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cohort::{Domain, IndexedPatient, Race, Gender};
use crate::error::{Error, Result};

/// A clinical concept: a code within a domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Concept {
    pub domain: Domain,
    pub code: String,
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.domain, self.code)
    }
}

/// Layout of the demographic tail block.
///
/// Columns, in order: six race indicators (Asian, Black, Hispanic, Other,
/// Unknown, White), two gender indicators (Female, Male), and one numeric age
/// column standardized with training-set statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemographicBlock {
    pub first_col: u32,
    pub age_mean: f64,
    pub age_std: f64,
}

impl DemographicBlock {
    pub const WIDTH: u32 = 9;

    pub fn race_col(&self, race: Race) -> u32 {
        self.first_col + race.id() as u32
    }

    pub fn gender_col(&self, gender: Gender) -> u32 {
        self.first_col + 6 + gender.id() as u32
    }

    pub fn age_col(&self) -> u32 {
        self.first_col + 8
    }

    pub fn standardize_age(&self, age_years: f64) -> f64 {
        (age_years - self.age_mean) / self.age_std
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Race::ALL.iter().map(|r| format!("demographic:race={}", r.name())).collect();
        names.extend(Gender::ALL.iter().map(|g| format!("demographic:gender={}", g.name())));
        names.push("demographic:age".into());
        names
    }
}

/// Concept-to-column map. Concept columns are ordered by (domain, code); the
/// demographic block, when present, follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: BTreeMap<Concept, u32>,
    concepts: Vec<Concept>,
    demographics: Option<DemographicBlock>,
}

impl Vocabulary {
    pub fn from_concepts(concepts: BTreeSet<Concept>, demographics: Option<(f64, f64)>) -> Self {
        let concepts: Vec<Concept> = concepts.into_iter().collect();
        let index = concepts.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();
        let first_col = concepts.len() as u32;
        Vocabulary {
            index,
            concepts,
            demographics: demographics.map(|(age_mean, age_std)| DemographicBlock {
                first_col,
                age_mean,
                age_std,
            }),
        }
    }

    /// Total feature count `m`.
    pub fn n_cols(&self) -> usize {
        self.concepts.len() + if self.demographics.is_some() { DemographicBlock::WIDTH as usize } else { 0 }
    }

    pub fn n_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn column(&self, domain: Domain, code: &str) -> Option<u32> {
        // BTreeMap lookup needs an owned key; concepts are short
        self.index
            .get(&Concept {
                domain,
                code: code.to_string(),
            })
            .copied()
    }

    pub fn concept(&self, col: u32) -> Option<&Concept> {
        self.concepts.get(col as usize)
    }

    pub fn demographics(&self) -> Option<&DemographicBlock> {
        self.demographics.as_ref()
    }

    /// Human-readable name of every column, in column order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.concepts.iter().map(Concept::to_string).collect();
        if let Some(d) = &self.demographics {
            names.extend(d.column_names());
        }
        names
    }
}

/// Build the vocabulary from training patients' pre-index history.
pub fn build_vocabulary(train: &[IndexedPatient], demographics: bool) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::validation("cohort", "cannot build a vocabulary from an empty cohort"));
    }
    let mut concepts = BTreeSet::new();
    for ip in train {
        for e in ip.patient.events.iter().filter(|e| e.date < ip.index_time) {
            concepts.insert(Concept {
                domain: e.domain,
                code: e.code.trim().to_string(),
            });
        }
    }
    let stats = demographics.then(|| {
        let ages: Vec<f64> = train.iter().map(|ip| f64::from(ip.age_at_index())).collect();
        let n = ages.len() as f64;
        let mean = ages.iter().sum::<f64>() / n;
        let var = ages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        (mean, std)
    });
    Ok(Vocabulary::from_concepts(concepts, stats))
}
