//! Synthetic longitudinal cohort generator.
//!
//! Each patient gets demographics, a record spanning three to ~nine years,
//! background concept events drawn from a Zipf distribution over the
//! vocabulary, and a set of informative concepts recorded in the first record
//! year. The outcome is drawn from `sigmoid(alpha_cell + w * k)` where `k` is
//! the number of informative concepts present; `alpha_cell` is solved per
//! (race, gender, age) cell so the cell incidence equals
//! `base_incidence * m_race * m_gender * m_age` exactly. The per-group score
//! shift moves the prevalence of informative concepts on the logit scale, so a
//! group's feature profile looks riskier (or safer) independent of its outcome
//! rate.
//!
//! Records are built so that every eligible index encounter lands in the
//! patient's drawn age bin and precedes the planted outcome event.

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use super::codes::CohortCodes;
use super::extract::MIN_HISTORY_DAYS;
use super::types::{age_in_years, ClinicalEvent, Domain, Gender, PatientRecord, Race, AGE_BIN_LOWER};
use crate::error::{Error, Result};
use crate::rng;

/// Per-attribute vectors, indexed by group id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerAttribute {
    pub race: Vec<f64>,
    pub gender: Vec<f64>,
    pub age: Vec<f64>,
}

impl PerAttribute {
    pub fn filled(v: f64) -> Self {
        PerAttribute {
            race: vec![v; 6],
            gender: vec![v; 2],
            age: vec![v; 4],
        }
    }

    fn named(&self) -> [(&'static str, &[f64], usize); 3] {
        [("race", &self.race, 6), ("gender", &self.gender, 2), ("age", &self.age, 4)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCohortConfig {
    pub n_patients: usize,
    pub group_proportions: PerAttribute,
    pub base_incidence: f64,
    pub incidence_multipliers: PerAttribute,
    pub group_score_shift: PerAttribute,
    pub concept_vocab_size: usize,
    pub n_informative: usize,
    /// Prevalence of each informative concept at zero shift.
    pub informative_prevalence: f64,
    /// Outcome log-odds added per informative concept present.
    pub signal_weight: f64,
    pub mean_events_per_patient: f64,
    pub mean_followup_years: f64,
    /// Fraction of patients given a prior cardiovascular diagnosis (excluded later).
    pub prior_cvd_fraction: f64,
    /// Fraction of outcome-negative patients given a non-fatal CHD code after index.
    pub nonfatal_chd_fraction: f64,
    /// Fraction of positives whose outcome is fatal CHD rather than MI/stroke.
    pub fatal_chd_share: f64,
    pub seed: u64,
}

impl Default for SyntheticCohortConfig {
    fn default() -> Self {
        let mut c = SyntheticCohortConfig::table1();
        c.n_patients = 20_000;
        c.prior_cvd_fraction = 0.03;
        c
    }
}

/// Table 1 group sizes (race, gender, age) and incidences.
pub const TABLE1_RACE_COUNTS: [f64; 6] = [34_156.0, 9_018.0, 21_587.0, 19_100.0, 30_300.0, 136_348.0];
pub const TABLE1_GENDER_COUNTS: [f64; 2] = [154_266.0, 96_074.0];
pub const TABLE1_AGE_COUNTS: [f64; 4] = [117_510.0, 64_477.0, 44_149.0, 24_373.0];
pub const TABLE1_RACE_INCIDENCE: [f64; 6] = [0.0144, 0.0271, 0.0152, 0.013, 0.00512, 0.0141];
pub const TABLE1_GENDER_INCIDENCE: [f64; 2] = [0.0116, 0.0167];
pub const TABLE1_AGE_INCIDENCE: [f64; 4] = [0.00603, 0.0128, 0.02, 0.0398];
pub const TABLE1_TOTAL: usize = 250_509;
pub const TABLE1_INCIDENCE: f64 = 0.0135;

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

impl SyntheticCohortConfig {
    /// Group proportions and incidences calibrated to Table 1.
    pub fn table1() -> Self {
        let proportions = PerAttribute {
            race: normalized(&TABLE1_RACE_COUNTS),
            gender: normalized(&TABLE1_GENDER_COUNTS),
            age: normalized(&TABLE1_AGE_COUNTS),
        };
        let targets = PerAttribute {
            race: TABLE1_RACE_INCIDENCE.to_vec(),
            gender: TABLE1_GENDER_INCIDENCE.to_vec(),
            age: TABLE1_AGE_INCIDENCE.to_vec(),
        };
        let incidence_multipliers = fit_incidence_multipliers(&proportions, TABLE1_INCIDENCE, &targets);
        SyntheticCohortConfig {
            n_patients: TABLE1_TOTAL,
            group_proportions: proportions,
            base_incidence: TABLE1_INCIDENCE,
            incidence_multipliers,
            group_score_shift: PerAttribute {
                race: vec![0.0, 0.2, 0.0, 0.0, -0.8, 0.0],
                gender: vec![0.0, 0.1],
                age: vec![-0.3, 0.0, 0.2, 0.4],
            },
            concept_vocab_size: 2_000,
            n_informative: 20,
            informative_prevalence: 0.15,
            signal_weight: 0.6,
            mean_events_per_patient: 20.0,
            mean_followup_years: 2.89,
            prior_cvd_fraction: 0.0,
            nonfatal_chd_fraction: 0.01,
            fatal_chd_share: 0.1,
            seed: 0,
        }
    }

    /// Train/validation/test fractions used with [`Self::desk_benchmark`].
    pub const DESK_BENCHMARK_RATIOS: (f64, f64, f64) = (0.5, 0.25, 0.25);

    /// Desk-scale fairness benchmark: balanced gender, Table 1-like age
    /// proportions, strongly group-dependent incidence, 200 feature columns.
    pub fn desk_benchmark() -> Self {
        SyntheticCohortConfig {
            n_patients: 20_000,
            group_proportions: PerAttribute {
                race: normalized(&TABLE1_RACE_COUNTS),
                gender: vec![0.5, 0.5],
                age: vec![0.47, 0.26, 0.18, 0.09],
            },
            base_incidence: 0.07,
            incidence_multipliers: PerAttribute {
                race: vec![1.0; 6],
                gender: vec![0.5, 1.5],
                age: vec![0.3, 0.7, 1.3, 1.7],
            },
            group_score_shift: PerAttribute {
                race: vec![0.0; 6],
                gender: vec![0.0, 0.3],
                age: vec![-0.3, 0.0, 0.2, 0.4],
            },
            concept_vocab_size: 190,
            n_informative: 20,
            informative_prevalence: 0.15,
            signal_weight: 0.6,
            mean_events_per_patient: 20.0,
            mean_followup_years: 2.89,
            prior_cvd_fraction: 0.02,
            nonfatal_chd_fraction: 0.01,
            fatal_chd_share: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v, k) in self.group_proportions.named() {
            let name = format!("group_proportions.{field}");
            if v.len() != k {
                return Err(Error::validation(name, format!("expected {k} entries, got {}", v.len())));
            }
            if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::validation(name, "entries must be non-negative"));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::validation(name, format!("must sum to 1, sums to {s}")));
            }
        }
        for (field, v, k) in self.incidence_multipliers.named() {
            if v.len() != k || v.iter().any(|m| !m.is_finite() || *m <= 0.0) {
                return Err(Error::validation(
                    format!("incidence_multipliers.{field}"),
                    format!("expected {k} positive entries"),
                ));
            }
        }
        for (field, v, k) in self.group_score_shift.named() {
            if v.len() != k || v.iter().any(|m| !m.is_finite()) {
                return Err(Error::validation(
                    format!("group_score_shift.{field}"),
                    format!("expected {k} finite entries"),
                ));
            }
        }
        if !(self.base_incidence > 0.0 && self.base_incidence < 1.0) {
            return Err(Error::validation("base_incidence", "must lie in (0, 1)"));
        }
        for cell in cells() {
            let p = self.cell_incidence(cell);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::validation(
                    "incidence_multipliers",
                    format!("cell {cell:?} incidence {p} outside (0, 1)"),
                ));
            }
        }
        if self.concept_vocab_size <= self.n_informative {
            return Err(Error::validation(
                "concept_vocab_size",
                "must exceed n_informative so background concepts exist",
            ));
        }
        if !(self.informative_prevalence > 0.0 && self.informative_prevalence < 1.0) {
            return Err(Error::validation("informative_prevalence", "must lie in (0, 1)"));
        }
        if !self.signal_weight.is_finite() {
            return Err(Error::validation("signal_weight", "must be finite"));
        }
        if !(self.mean_events_per_patient > 0.0 && self.mean_events_per_patient.is_finite()) {
            return Err(Error::validation("mean_events_per_patient", "must be positive"));
        }
        let min_years = f64::from(MIN_RECORD_DAYS as i32) / DAYS_PER_YEAR;
        if !(self.mean_followup_years * 2.0 >= min_years && self.mean_followup_years <= 10.0) {
            return Err(Error::validation(
                "mean_followup_years",
                format!("must lie in [{:.2}, 10]", min_years / 2.0),
            ));
        }
        for (name, f) in [
            ("prior_cvd_fraction", self.prior_cvd_fraction),
            ("nonfatal_chd_fraction", self.nonfatal_chd_fraction),
            ("fatal_chd_share", self.fatal_chd_share),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::validation(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn cell_incidence(&self, (r, g, a): Cell) -> f64 {
        let m = &self.incidence_multipliers;
        self.base_incidence * m.race[r] * m.gender[g] * m.age[a]
    }

    pub fn cell_probability(&self, (r, g, a): Cell) -> f64 {
        let p = &self.group_proportions;
        p.race[r] * p.gender[g] * p.age[a]
    }

    pub fn cell_shift(&self, (r, g, a): Cell) -> f64 {
        let s = &self.group_score_shift;
        s.race[r] + s.gender[g] + s.age[a]
    }

    /// Expected fraction of generated patients with `attribute == group` and the given outcome.
    pub fn expected_joint(&self, attribute: Option<(usize, usize)>, positive: Option<bool>) -> f64 {
        cells()
            .filter(|&(r, g, a)| match attribute {
                None => true,
                Some((0, k)) => r == k,
                Some((1, k)) => g == k,
                Some((_, k)) => a == k,
            })
            .map(|c| {
                let pc = self.cell_probability(c);
                match positive {
                    None => pc,
                    Some(true) => pc * self.cell_incidence(c),
                    Some(false) => pc * (1.0 - self.cell_incidence(c)),
                }
            })
            .sum()
    }
}

/// (race, gender, age-bin) ids.
pub type Cell = (usize, usize, usize);

pub fn cells() -> impl Iterator<Item = Cell> {
    (0..6).flat_map(|r| (0..2).flat_map(move |g| (0..4).map(move |a| (r, g, a))))
}

fn cell_index((r, g, a): Cell) -> usize {
    (r * 2 + g) * 4 + a
}

/// Fit per-group multipliers so a multiplicative incidence model with
/// independent attributes reproduces the target per-group incidences.
pub fn fit_incidence_multipliers(proportions: &PerAttribute, base: f64, targets: &PerAttribute) -> PerAttribute {
    let mut m = PerAttribute {
        race: targets.race.iter().map(|t| t / base).collect(),
        gender: targets.gender.iter().map(|t| t / base).collect(),
        age: targets.age.iter().map(|t| t / base).collect(),
    };
    for _ in 0..500 {
        // marginal of each factor given the others, then rescale toward the target
        let mean_g: f64 = (0..2).map(|g| proportions.gender[g] * m.gender[g]).sum();
        let mean_a: f64 = (0..4).map(|a| proportions.age[a] * m.age[a]).sum();
        for r in 0..6 {
            m.race[r] = targets.race[r] / (base * mean_g * mean_a);
        }
        let mean_r: f64 = (0..6).map(|r| proportions.race[r] * m.race[r]).sum();
        for g in 0..2 {
            m.gender[g] = targets.gender[g] / (base * mean_r * mean_a);
        }
        let mean_g: f64 = (0..2).map(|g| proportions.gender[g] * m.gender[g]).sum();
        for a in 0..4 {
            m.age[a] = targets.age[a] / (base * mean_r * mean_g);
        }
    }
    m
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    // log-space binomial coefficients
    let mut log_c = 0.0f64;
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        *slot = (log_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
    }
    out
}

/// Intercept `alpha` such that `E_k[sigmoid(alpha + w k)] = target`, with
/// `k ~ Binomial(n, q)`.
pub fn solve_intercept(target: f64, n: usize, q: f64, w: f64) -> f64 {
    let pmf = binomial_pmf(n, q);
    let mean = |alpha: f64| -> f64 {
        pmf.iter()
            .enumerate()
            .map(|(k, pk)| pk * sigmoid(alpha + w * k as f64))
            .sum()
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const DAYS_PER_YEAR: f64 = 365.25;
/// Shortest record: two years of span plus slack for a non-trivial index window.
const MIN_RECORD_DAYS: i64 = 1_100;
const OLDEST_AGE: i32 = 90;
const CHD_CODES_NONFATAL: &[&str] = &["414.01", "413.9", "411.1", "414.00"];
const PRIOR_CVD_CODES: &[&str] = &["427.31", "428.0", "410.90", "434.91", "414.01"];

/// Generator with per-cell intercepts precomputed.
#[derive(Debug, Clone)]
pub struct CohortGenerator {
    config: SyntheticCohortConfig,
    intercepts: Vec<f64>,
    prevalence: Vec<f64>,
    ascvd_codes: Vec<String>,
    chd_codes: Vec<String>,
}

impl CohortGenerator {
    pub fn new(config: SyntheticCohortConfig) -> Result<Self> {
        config.validate()?;
        let mut intercepts = vec![0.0; 48];
        let mut prevalence = vec![0.0; 48];
        for cell in cells() {
            let q = sigmoid(logit(config.informative_prevalence) + config.cell_shift(cell));
            prevalence[cell_index(cell)] = q;
            intercepts[cell_index(cell)] =
                solve_intercept(config.cell_incidence(cell), config.n_informative, q, config.signal_weight);
        }
        let codes = CohortCodes::builtin();
        Ok(CohortGenerator {
            config,
            intercepts,
            prevalence,
            ascvd_codes: codes.ascvd.iter().map(str::to_string).collect(),
            chd_codes: codes.fatal_chd.iter().map(str::to_string).collect(),
        })
    }

    pub fn config(&self) -> &SyntheticCohortConfig {
        &self.config
    }

    /// Outcome intercept for a (race, gender, age) cell.
    pub fn intercept(&self, cell: Cell) -> f64 {
        self.intercepts[cell_index(cell)]
    }

    /// Concept string for vocabulary slot `idx` (informative slots first).
    pub fn concept(idx: usize) -> (Domain, String) {
        let domain = Domain::ALL[idx % Domain::ALL.len()];
        let prefix = match domain {
            Domain::Diagnosis => "DX",
            Domain::Procedure => "PX",
            Domain::MedicationOrder => "RX",
            Domain::LabTest => "LB",
            Domain::EncounterType => "EN",
            Domain::Department => "DP",
            Domain::Observation => "OB",
        };
        (domain, format!("{prefix}{idx:05}"))
    }

    /// Generate the `index`-th patient from its own stream.
    pub fn patient(&self, index: usize) -> PatientRecord {
        let cfg = &self.config;
        let mut rng = rng::substream(cfg.seed, "cohort-patient", index as u64);
        let r = categorical(&mut rng, &cfg.group_proportions.race);
        let g = categorical(&mut rng, &cfg.group_proportions.gender);
        let a = categorical(&mut rng, &cfg.group_proportions.age);
        let cell = (r, g, a);

        let max_record = (2.0 * cfg.mean_followup_years * DAYS_PER_YEAR).round() as i64 - MIN_RECORD_DAYS;
        let record_days = rng.random_range(MIN_RECORD_DAYS..=max_record.max(MIN_RECORD_DAYS));
        let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let start = epoch + Duration::days(rng.random_range(0..3_650));
        let end = start + Duration::days(record_days);
        let window_start = start + Duration::days(MIN_HISTORY_DAYS);
        let window_end = end - Duration::days(MIN_HISTORY_DAYS);
        let birth_date = self.birth_date(&mut rng, a, start, window_start, window_end);

        let mut events = vec![
            ClinicalEvent::new(start, Domain::EncounterType, "EN_OFFICE"),
            ClinicalEvent::new(end, Domain::EncounterType, "EN_OFFICE"),
            ClinicalEvent::new(
                window_start + Duration::days(rng.random_range(0..=(window_end - window_start).num_days())),
                Domain::EncounterType,
                "EN_OFFICE",
            ),
        ];

        let q = self.prevalence[cell_index(cell)];
        let mut present = 0usize;
        for j in 0..cfg.n_informative {
            if rng.random::<f64>() < q {
                present += 1;
                let (domain, code) = Self::concept(j);
                let date = start + Duration::days(rng.random_range(0..MIN_HISTORY_DAYS));
                events.push(concept_event(&mut rng, date, domain, code));
            }
        }

        let n_background = Poisson::new(cfg.mean_events_per_patient)
            .expect("validated mean")
            .sample(&mut rng) as usize;
        let zipf = Zipf::new((cfg.concept_vocab_size - cfg.n_informative) as f64, 1.0).expect("vocab > 0");
        for _ in 0..n_background {
            let rank = zipf.sample(&mut rng) as usize - 1;
            let (domain, code) = Self::concept(cfg.n_informative + rank);
            let date = start + Duration::days(rng.random_range(0..=record_days));
            events.push(concept_event(&mut rng, date, domain, code));
        }

        if rng.random::<f64>() < cfg.prior_cvd_fraction {
            let code = PRIOR_CVD_CODES[rng.random_range(0..PRIOR_CVD_CODES.len())];
            let date = start + Duration::days(rng.random_range(0..MIN_HISTORY_DAYS));
            events.push(ClinicalEvent::new(date, Domain::Diagnosis, code));
        }

        let logit = self.intercepts[cell_index(cell)] + cfg.signal_weight * present as f64;
        let positive = rng.random::<f64>() < sigmoid(logit);
        let mut death_date = None;
        // outcome events land after every eligible index date (> window_end)
        let late_day = |rng: &mut rng::StreamRng| end - Duration::days(rng.random_range(0..MIN_HISTORY_DAYS));
        if positive {
            if rng.random::<f64>() < cfg.fatal_chd_share {
                let code = &self.chd_codes[rng.random_range(0..self.chd_codes.len())];
                let c = late_day(&mut rng);
                let latest = (c + Duration::days(365) - end).num_days();
                death_date = Some(end + Duration::days(rng.random_range(0..=latest)));
                events.push(ClinicalEvent::new(c, Domain::Diagnosis, code.clone()));
            } else {
                let code = &self.ascvd_codes[rng.random_range(0..self.ascvd_codes.len())];
                let c = late_day(&mut rng);
                events.push(ClinicalEvent::new(c, Domain::Diagnosis, code.clone()));
            }
        } else if rng.random::<f64>() < cfg.nonfatal_chd_fraction {
            let code = CHD_CODES_NONFATAL[rng.random_range(0..CHD_CODES_NONFATAL.len())];
            let c = late_day(&mut rng);
            events.push(ClinicalEvent::new(c, Domain::Diagnosis, code));
        }

        events.sort_by_key(|e| e.date);
        PatientRecord {
            patient_id: format!("P{index:08}"),
            birth_date,
            gender: Gender::ALL[g],
            race: Race::ALL[r],
            death_date,
            events,
        }
    }

    /// Birth date such that the patient is >= 40 at record start and every date
    /// in `[window_start, window_end]` falls in age bin `a`.
    fn birth_date(
        &self,
        rng: &mut rng::StreamRng,
        a: usize,
        start: NaiveDate,
        window_start: NaiveDate,
        window_end: NaiveDate,
    ) -> NaiveDate {
        let lo = AGE_BIN_LOWER[a];
        let hi = AGE_BIN_LOWER.get(a + 1).copied().unwrap_or(OLDEST_AGE);
        let window = (window_end - window_start).num_days();
        let lo_days = (f64::from(lo.max(41)) * DAYS_PER_YEAR).ceil() as i64 + 2;
        let hi_days = ((f64::from(hi) * DAYS_PER_YEAR).floor() as i64 - window - 2).max(lo_days);
        loop {
            let age_days = rng.random_range(lo_days..=hi_days);
            let birth = window_start - Duration::days(age_days);
            if age_in_years(birth, start) >= 40
                && age_in_years(birth, window_start) >= lo
                && age_in_years(birth, window_end) < hi
            {
                return birth;
            }
        }
    }

    /// All `n_patients` records, generated in parallel and returned in order.
    pub fn generate(&self) -> Vec<PatientRecord> {
        use rayon::prelude::*;
        (0..self.config.n_patients).into_par_iter().map(|i| self.patient(i)).collect()
    }
}

fn concept_event(rng: &mut rng::StreamRng, date: NaiveDate, domain: Domain, code: String) -> ClinicalEvent {
    let event = ClinicalEvent::new(date, domain, code);
    if domain == Domain::LabTest {
        let v: f64 = Normal::new(5.0, 2.0).expect("valid normal").sample(rng);
        event.with_value((v * 10.0).round() / 10.0)
    } else {
        event
    }
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in rounding slack; take the last group with mass
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Generate a synthetic cohort; deterministic for a fixed config (including seed).
pub fn generate_synthetic_cohort(config: &SyntheticCohortConfig) -> Result<Vec<PatientRecord>> {
    Ok(CohortGenerator::new(config.clone())?.generate())
}
