use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;

use super::*;
use crate::cohort::{
    extract_cohort, generate_synthetic_cohort, ClinicalEvent, CohortCodes, Domain, Gender, IndexedPatient,
    PatientRecord, Race, SyntheticCohortConfig, DEFAULT_RATIOS,
};
use crate::rng;

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn ip(events: Vec<ClinicalEvent>, index: NaiveDate) -> IndexedPatient {
    IndexedPatient {
        patient: PatientRecord {
            patient_id: "p".into(),
            birth_date: d(1950, 3, 3),
            gender: Gender::Male,
            race: Race::Black,
            death_date: None,
            events,
        },
        index_time: index,
        followup_end: index + Duration::days(400),
    }
}

#[test]
fn shared_concept_gets_one_column() {
    let idx = d(2010, 1, 1);
    let a = ip(vec![ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "250.00")], idx);
    let b = ip(vec![ClinicalEvent::new(d(2008, 1, 1), Domain::Diagnosis, "250.00")], idx);
    let v = build_vocabulary(&[a, b], false).unwrap();
    assert_eq!(v.n_cols(), 1);
    assert_eq!(v.column(Domain::Diagnosis, "250.00"), Some(0));
}

#[test]
fn post_index_only_concept_is_absent() {
    let idx = d(2010, 1, 1);
    let a = ip(
        vec![
            ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "250.00"),
            ClinicalEvent::new(idx, Domain::Procedure, "later"),
            ClinicalEvent::new(d(2011, 1, 1), Domain::LabTest, "later2"),
        ],
        idx,
    );
    let v = build_vocabulary(&[a], false).unwrap();
    assert_eq!(v.column(Domain::Procedure, "later"), None);
    assert_eq!(v.column(Domain::LabTest, "later2"), None);
    assert_eq!(v.n_cols(), 1);
}

#[test]
fn three_concepts_with_demographics_gives_twelve_columns() {
    let idx = d(2010, 1, 1);
    let a = ip(
        vec![
            ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "a"),
            ClinicalEvent::new(d(2009, 1, 2), Domain::Procedure, "b"),
        ],
        idx,
    );
    let b = ip(vec![ClinicalEvent::new(d(2009, 1, 1), Domain::Department, "c")], idx);
    let v = build_vocabulary(&[a, b], true).unwrap();
    assert_eq!(v.n_cols(), 3 + 6 + 2 + 1);
    assert_eq!(v.column_names()[3], "demographic:race=Asian");
    assert_eq!(v.column_names()[11], "demographic:age");
}

#[test]
fn empty_cohort_is_rejected() {
    assert!(matches!(build_vocabulary(&[], true), Err(crate::Error::Validation { .. })));
}

#[test]
fn vocabulary_is_ordered_by_domain_then_code() {
    let idx = d(2010, 1, 1);
    let a = ip(
        vec![
            ClinicalEvent::new(d(2009, 1, 1), Domain::Observation, "a"),
            ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "z"),
            ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "b"),
        ],
        idx,
    );
    let v = build_vocabulary(&[a], false).unwrap();
    assert_eq!(v.column_names(), vec!["Diagnosis:b", "Diagnosis:z", "Observation:a"]);
}

#[test]
fn repeated_concept_and_lab_values_give_presence_only() {
    let idx = d(2010, 1, 1);
    let p = ip(
        vec![
            ClinicalEvent::new(d(2008, 1, 1), Domain::Diagnosis, "250.00"),
            ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "250.00"),
            ClinicalEvent::new(d(2009, 2, 1), Domain::LabTest, "HBA1C").with_value(7.2),
        ],
        idx,
    );
    let v = build_vocabulary(std::slice::from_ref(&p), false).unwrap();
    let row = extract_features(&p, &v);
    assert_eq!(row.binary, vec![0, 1]);
    assert!(row.numeric.is_empty());
    assert!(row.entries().iter().all(|&(_, x)| x == 1.0));
}

#[test]
fn empty_history_gives_demographics_only() {
    let idx = d(2010, 1, 1);
    let train = ip(vec![ClinicalEvent::new(d(2009, 1, 1), Domain::Diagnosis, "x")], idx);
    let v = build_vocabulary(&[train], true).unwrap();
    let empty = ip(vec![ClinicalEvent::new(d(2011, 1, 1), Domain::Diagnosis, "x")], idx);
    let row = extract_features(&empty, &v);
    let demo = v.demographics().unwrap();
    assert_eq!(row.binary, vec![demo.race_col(Race::Black), demo.gender_col(Gender::Male)]);
    assert_eq!(row.numeric.len(), 1);
    assert_eq!(row.numeric[0].0, demo.age_col());
    // single training patient: zero variance falls back to unit scale
    assert_eq!(row.numeric[0].1, 0.0);
}

fn sample_cohort(n: usize) -> Vec<crate::cohort::ExtractedPatient> {
    let cfg = SyntheticCohortConfig {
        n_patients: n,
        concept_vocab_size: 300,
        seed: 5,
        ..SyntheticCohortConfig::table1()
    };
    let recs = generate_synthetic_cohort(&cfg).unwrap();
    extract_cohort(&recs, &CohortCodes::builtin(), 5).unwrap().patients
}

#[test]
fn coordinates_match_brute_force_pre_index_scan() {
    let cohort = sample_cohort(1000);
    assert!(cohort.len() >= 990);
    let train: Vec<_> = cohort.iter().take(800).map(|p| p.indexed.clone()).collect();
    let vocab = build_vocabulary(&train, false).unwrap();
    for p in &cohort {
        let row = extract_features(&p.indexed, &vocab);
        let mut expected = BTreeSet::new();
        for e in &p.indexed.patient.events {
            if e.date < p.indexed.index_time {
                for c in 0..vocab.n_concepts() as u32 {
                    let concept = vocab.concept(c).unwrap();
                    if concept.domain == e.domain && concept.code == e.code {
                        expected.insert(c);
                    }
                }
            }
        }
        assert_eq!(row.binary, expected.into_iter().collect::<Vec<_>>());
    }
}

#[test]
fn extraction_ignores_event_order_and_post_index_changes() {
    let cohort = sample_cohort(200);
    let train: Vec<_> = cohort.iter().map(|p| p.indexed.clone()).collect();
    let vocab = build_vocabulary(&train, true).unwrap();
    let mut r = rng::stream(1, "perturb");
    for p in &cohort {
        let base = extract_features(&p.indexed, &vocab);
        assert_eq!(extract_features(&p.indexed, &vocab), base);

        let mut shuffled = p.indexed.clone();
        shuffled.patient.events.shuffle(&mut r);
        assert_eq!(extract_features(&shuffled, &vocab), base);

        let mut perturbed = p.indexed.clone();
        for e in perturbed.patient.events.iter_mut().filter(|e| e.date >= p.indexed.index_time) {
            e.code = format!("changed{}", r.random::<u16>());
            e.domain = Domain::Diagnosis;
        }
        perturbed.patient.events.push(ClinicalEvent::new(
            p.indexed.index_time + Duration::days(3),
            Domain::Diagnosis,
            vocab.concept(0).unwrap().code.clone(),
        ));
        assert_eq!(extract_features(&perturbed, &vocab), base);
    }
}

#[test]
fn prepared_cohort_round_trips_through_files() {
    let cohort = sample_cohort(120);
    let prepared = prepare_dataset(&cohort, DEFAULT_RATIOS, 3).unwrap();
    assert_eq!(prepared.dataset.rows_in(crate::cohort::SplitTag::Val).len(), cohort.len() / 10);
    let dir = tempfile::tempdir().unwrap();
    prepared.write(dir.path()).unwrap();
    let back = PreparedCohort::read(dir.path()).unwrap();
    assert_eq!(back.dataset, prepared.dataset);
    assert_eq!(back.vocabulary, prepared.vocabulary);
    assert_eq!(back.ages, prepared.ages);
    let header = std::fs::read_to_string(dir.path().join("features.txt")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        format!("{} {}", prepared.matrix.n_rows, prepared.matrix.n_cols)
    );
}

#[test]
fn coordinates_are_unique_and_in_range() {
    let cohort = sample_cohort(150);
    let prepared = prepare_dataset(&cohort, DEFAULT_RATIOS, 3).unwrap();
    let m = &prepared.matrix;
    let set: BTreeSet<_> = m.coords.iter().collect();
    assert_eq!(set.len(), m.coords.len());
    assert!(m.coords.iter().all(|&(r, c)| (r as usize) < m.n_rows && (c as usize) < m.n_cols));
}
