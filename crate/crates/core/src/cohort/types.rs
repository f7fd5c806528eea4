use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Race {
    Asian,
    Black,
    Hispanic,
    Other,
    Unknown,
    White,
}

impl Race {
    pub const ALL: [Race; 6] = [
        Race::Asian,
        Race::Black,
        Race::Hispanic,
        Race::Other,
        Race::Unknown,
        Race::White,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Race::Asian => "Asian",
            Race::Black => "Black",
            Race::Hispanic => "Hispanic",
            Race::Other => "Other",
            Race::Unknown => "Unknown",
            Race::White => "White",
        }
    }
}

/// The seven clinical domains concepts are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Diagnosis,
    Procedure,
    MedicationOrder,
    LabTest,
    EncounterType,
    Department,
    Observation,
}

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::Diagnosis,
        Domain::Procedure,
        Domain::MedicationOrder,
        Domain::LabTest,
        Domain::EncounterType,
        Domain::Department,
        Domain::Observation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Diagnosis => "Diagnosis",
            Domain::Procedure => "Procedure",
            Domain::MedicationOrder => "MedicationOrder",
            Domain::LabTest => "LabTest",
            Domain::EncounterType => "EncounterType",
            Domain::Department => "Department",
            Domain::Observation => "Observation",
        }
    }

    pub fn from_name(s: &str) -> Option<Domain> {
        Domain::ALL.into_iter().find(|d| d.name() == s)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEvent {
    pub date: NaiveDate,
    pub domain: Domain,
    pub code: String,
    /// Numeric result for labs/vitals. Carried through I/O, never used as a feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl ClinicalEvent {
    pub fn new(date: NaiveDate, domain: Domain, code: impl Into<String>) -> Self {
        ClinicalEvent {
            date,
            domain,
            code: code.into(),
            value: None,
        }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub birth_date: NaiveDate,
    pub gender: Gender,
    pub race: Race,
    #[serde(default)]
    pub death_date: Option<NaiveDate>,
    pub events: Vec<ClinicalEvent>,
}

impl PatientRecord {
    pub fn first_event_date(&self) -> Option<NaiveDate> {
        self.events.first().map(|e| e.date)
    }

    pub fn last_event_date(&self) -> Option<NaiveDate> {
        self.events.last().map(|e| e.date)
    }

    /// Record end used for follow-up: the earlier of last event and death.
    pub fn record_end(&self) -> Option<NaiveDate> {
        let last = self.last_event_date()?;
        Some(match self.death_date {
            Some(d) if d < last => d,
            _ => last,
        })
    }

    /// Distinct encounter dates, ascending.
    pub fn encounter_dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self.events.iter().map(|e| e.date).collect();
        dates.dedup();
        dates
    }

    pub fn events_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].date <= w[1].date)
    }

    /// Stable sort of events by date.
    pub fn sort_events(&mut self) {
        self.events.sort_by_key(|e| e.date);
    }
}

/// Age in completed years on `on`.
pub fn age_in_years(birth: NaiveDate, on: NaiveDate) -> i32 {
    let mut age = on.year() - birth.year();
    if (on.month(), on.day()) < (birth.month(), birth.day()) {
        age -= 1;
    }
    age
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedPatient {
    pub patient: PatientRecord,
    pub index_time: NaiveDate,
    pub followup_end: NaiveDate,
}

impl IndexedPatient {
    pub fn age_at_index(&self) -> i32 {
        age_in_years(self.patient.birth_date, self.index_time)
    }

    pub fn followup_days(&self) -> i64 {
        (self.followup_end - self.index_time).num_days()
    }
}

/// Sensitive attribute the discriminator can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Race,
    Gender,
    Age,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Race, Attribute::Gender, Attribute::Age];

    pub fn group_count(self) -> usize {
        match self {
            Attribute::Race => 6,
            Attribute::Gender => 2,
            Attribute::Age => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Race => "race",
            Attribute::Gender => "gender",
            Attribute::Age => "age",
        }
    }

    pub fn group_names(self) -> &'static [&'static str] {
        match self {
            Attribute::Race => &["Asian", "Black", "Hispanic", "Other", "Unknown", "White"],
            Attribute::Gender => &["Female", "Male"],
            Attribute::Age => &AGE_GROUP_NAMES,
        }
    }

    pub fn parse(s: &str) -> Option<Attribute> {
        Attribute::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const AGE_GROUP_NAMES: [&str; 4] = ["40-55", "55-65", "65-75", "75+"];

/// Lower bounds of the age bins; each bin is `[lower, next lower)`.
pub const AGE_BIN_LOWER: [i32; 4] = [40, 55, 65, 75];

pub fn age_group_of(age: i32) -> Option<usize> {
    if age < AGE_BIN_LOWER[0] {
        return None;
    }
    Some(AGE_BIN_LOWER.iter().rposition(|&lo| age >= lo).unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub race_group: usize,
    pub gender_group: usize,
    pub age_group: usize,
}

impl GroupAssignment {
    pub fn get(&self, attribute: Attribute) -> usize {
        match attribute {
            Attribute::Race => self.race_group,
            Attribute::Gender => self.gender_group,
            Attribute::Age => self.age_group,
        }
    }
}
