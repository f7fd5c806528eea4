use eqodds::cohort::{extract_cohort, generate_synthetic_cohort, CohortCodes, SplitTag, SyntheticCohortConfig};
use eqodds::features::{prepare_dataset, PreparedCohort};
use eqodds::neural::checkpoint;
use eqodds::trainer::{evaluate, train, SensitiveAttribute, TrainConfig};

fn small_cohort() -> PreparedCohort {
    let cfg = SyntheticCohortConfig { n_patients: 1500, base_incidence: 0.08, seed: 11, ..SyntheticCohortConfig::default() };
    let records = generate_synthetic_cohort(&cfg).unwrap();
    let extraction = extract_cohort(&records, &CohortCodes::builtin(), cfg.seed).unwrap();
    assert_eq!(extraction.funnel.input, 1500);
    assert_eq!(extraction.funnel.post_exclusion, extraction.patients.len());
    prepare_dataset(&extraction.patients, (0.6, 0.2, 0.2), cfg.seed).unwrap()
}

fn small_train(attr: SensitiveAttribute) -> TrainConfig {
    TrainConfig {
        classifier_hidden: vec![16],
        discriminator_hidden: vec![8],
        epochs: 3,
        batches_per_epoch: 10,
        batch_size: 64,
        eq_auc_floor: 0.0,
        sensitive_attribute: attr,
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn prepared_cohort_round_trips_through_disk() {
    let prepared = small_cohort();
    let dir = tempfile::tempdir().unwrap();
    prepared.write(dir.path()).unwrap();
    let back = PreparedCohort::read(dir.path()).unwrap();
    assert_eq!(back.dataset, prepared.dataset);
    for split in [SplitTag::Train, SplitTag::Val, SplitTag::Test] {
        assert!(!prepared.dataset.rows_in(split).is_empty());
    }
}

#[test]
fn trained_checkpoint_reloads_to_the_same_report() {
    let prepared = small_cohort();
    let data = &prepared.dataset;
    for attr in [SensitiveAttribute::None, SensitiveAttribute::Age] {
        let model = train(data, &small_train(attr)).unwrap();
        assert!(model.selected_epoch <= 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        checkpoint::save(&path, &model.params, "meta").unwrap();
        let (params, meta) = checkpoint::load(&path).unwrap();
        assert_eq!(meta, "meta");
        // the in-memory version counter is not persisted
        assert_eq!(params.spec, model.params.spec);
        assert_eq!(params.layers, model.params.layers);
        let a = evaluate(&model.params, data, SplitTag::Test, 0.075).unwrap();
        let b = evaluate(&params, data, SplitTag::Test, 0.075).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.overall.n, data.rows_in(SplitTag::Test).len());
    }
}

#[test]
fn training_is_reproducible_for_a_seed() {
    let prepared = small_cohort();
    let cfg = small_train(SensitiveAttribute::Gender);
    let a = train(&prepared.dataset, &cfg).unwrap();
    let b = train(&prepared.dataset, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.manifest(), b.manifest());
}
