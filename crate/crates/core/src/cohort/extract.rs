//! Index-time selection, exclusion and outcome rules, group assignment.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;

use super::codes::{CodeList, CohortCodes};
use super::types::{age_group_of, age_in_years, Domain, GroupAssignment, IndexedPatient, PatientRecord};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_AGE_YEARS: i32 = 40;
pub const MIN_HISTORY_DAYS: i64 = 365;
pub const MIN_FOLLOWUP_DAYS: i64 = 365;
pub const MIN_SPAN_DAYS: i64 = 730;
/// Five calendar years including one leap day.
pub const LIPID_LOOKBACK_DAYS: i64 = 1826;
pub const FATAL_CHD_WINDOW_DAYS: i64 = 365;

/// Encounter dates a patient could be indexed on.
///
/// Empty when the patient lacks two encounters at age >= 40 spanning two years,
/// or when no such encounter has a year of record on both sides. History is
/// anchored at the first event, follow-up at `min(last event, death)`.
pub fn eligible_index_dates(patient: &PatientRecord) -> Vec<NaiveDate> {
    let encounters: BTreeSet<NaiveDate> = patient.events.iter().map(|e| e.date).collect();
    let adult: Vec<NaiveDate> = encounters
        .iter()
        .copied()
        .filter(|&d| age_in_years(patient.birth_date, d) >= MIN_AGE_YEARS)
        .collect();
    let (Some(&lo), Some(&hi)) = (adult.first(), adult.last()) else {
        return Vec::new();
    };
    if adult.len() < 2 || (hi - lo).num_days() < MIN_SPAN_DAYS {
        return Vec::new();
    }
    let first = *encounters.first().expect("non-empty");
    let last = *encounters.last().expect("non-empty");
    let end = match patient.death_date {
        Some(d) if d < last => d,
        _ => last,
    };
    adult
        .into_iter()
        .filter(|&d| (d - first).num_days() >= MIN_HISTORY_DAYS && (end - d).num_days() >= MIN_FOLLOWUP_DAYS)
        .collect()
}

/// Pick one eligible encounter uniformly at random; `None` excludes the patient.
pub fn select_index_time<R: Rng + ?Sized>(patient: &PatientRecord, rng: &mut R) -> Option<IndexedPatient> {
    let eligible = eligible_index_dates(patient);
    if eligible.is_empty() {
        return None;
    }
    let index_time = eligible[rng.random_range(0..eligible.len())];
    let followup_end = patient.record_end().expect("eligible patient has events");
    Some(IndexedPatient {
        patient: patient.clone(),
        index_time,
        followup_end,
    })
}

/// True when the patient has prior cardiovascular disease (any time before
/// index) or a lipid-lowering order in the five years before index.
pub fn apply_exclusions(ip: &IndexedPatient, cvd_codes: &CodeList, lipid_codes: &CodeList) -> bool {
    ip.patient.events.iter().any(|e| {
        let before = (ip.index_time - e.date).num_days();
        match e.domain {
            Domain::Diagnosis => before > 0 && cvd_codes.contains(&e.code),
            Domain::MedicationOrder => {
                before > 0 && before <= LIPID_LOOKBACK_DAYS && lipid_codes.contains(&e.code)
            }
            _ => false,
        }
    })
}

/// 1 when an ASCVD code appears at or after index, or a CHD code at or after
/// index is followed by death within 365 days.
pub fn label_outcome(ip: &IndexedPatient, ascvd_codes: &CodeList, chd_codes: &CodeList) -> u8 {
    let death = ip.patient.death_date;
    let positive = ip.patient.events.iter().any(|e| {
        if e.domain != Domain::Diagnosis || e.date < ip.index_time {
            return false;
        }
        if ascvd_codes.contains(&e.code) {
            return true;
        }
        match death {
            Some(d) if chd_codes.contains(&e.code) => {
                let gap = (d - e.date).num_days();
                (0..=FATAL_CHD_WINDOW_DAYS).contains(&gap)
            }
            _ => false,
        }
    });
    u8::from(positive)
}

pub fn assign_groups(ip: &IndexedPatient) -> Result<GroupAssignment> {
    let age = ip.age_at_index();
    let age_group = age_group_of(age).ok_or_else(|| {
        Error::Contract(format!(
            "patient {} is {age} at index time, below the minimum age {MIN_AGE_YEARS}",
            ip.patient.patient_id
        ))
    })?;
    Ok(GroupAssignment {
        race_group: ip.patient.race.id(),
        gender_group: ip.patient.gender.id(),
        age_group,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPatient {
    pub indexed: IndexedPatient,
    pub label: u8,
    pub groups: GroupAssignment,
}

/// Counts at each extraction stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Funnel {
    pub input: usize,
    pub eligible: usize,
    pub post_exclusion: usize,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub patients: Vec<ExtractedPatient>,
    pub funnel: Funnel,
}

/// Stream used to draw the index time of the `position`-th input record.
pub fn index_time_rng(seed: u64, position: usize) -> rng::StreamRng {
    rng::substream(seed, "index-time", position as u64)
}

/// Run index selection, exclusions, labeling and group assignment.
///
/// Each record draws its index time from its own stream keyed by input
/// position, so the result does not depend on thread scheduling.
pub fn extract_cohort(records: &[PatientRecord], codes: &CohortCodes, seed: u64) -> Result<Extraction> {
    let staged: Vec<Result<Option<(bool, ExtractedPatient)>>> = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut r = index_time_rng(seed, i);
            let Some(ip) = select_index_time(rec, &mut r) else {
                return Ok(None);
            };
            let excluded = apply_exclusions(&ip, &codes.cvd_exclusion, &codes.lipid_lowering);
            let label = label_outcome(&ip, &codes.ascvd, &codes.fatal_chd);
            let groups = assign_groups(&ip)?;
            Ok(Some((excluded, ExtractedPatient { indexed: ip, label, groups })))
        })
        .collect();
    let mut funnel = Funnel {
        input: records.len(),
        ..Funnel::default()
    };
    let mut patients = Vec::new();
    for s in staged {
        if let Some((excluded, p)) = s? {
            funnel.eligible += 1;
            if !excluded {
                funnel.post_exclusion += 1;
                patients.push(p);
            }
        }
    }
    Ok(Extraction { patients, funnel })
}
