//! Standard vs EQ arms on a desk-scale synthetic cohort.
//!
//! `cargo run --release -p eqodds-core --example desk_benchmark [seed]`

use std::time::Instant;

use eqodds::cohort::{extract_cohort, generate_synthetic_cohort, Attribute, CohortCodes, SplitTag, SyntheticCohortConfig};
use eqodds::features::prepare_dataset;
use eqodds::metrics::{table2_csv, table3_csv};
use eqodds::trainer::{evaluate, train, SensitiveAttribute, TrainConfig};

fn main() -> eqodds::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let t0 = Instant::now();
    let cohort_cfg = SyntheticCohortConfig { seed, ..SyntheticCohortConfig::desk_benchmark() };
    let records = generate_synthetic_cohort(&cohort_cfg)?;
    let extraction = extract_cohort(&records, &CohortCodes::builtin(), seed)?;
    let prepared = prepare_dataset(&extraction.patients, SyntheticCohortConfig::DESK_BENCHMARK_RATIOS, seed)?;
    let data = &prepared.dataset;
    let positives = data.labels.iter().filter(|&&y| y == 1).count();
    println!("rows {} cols {} positives {positives} ({:.1}s)", data.n_rows(), data.n_cols(), t0.elapsed().as_secs_f64());

    let base = TrainConfig { seed, ..TrainConfig::desk_benchmark() };
    let mut reports = Vec::new();
    for attr in [SensitiveAttribute::None, SensitiveAttribute::Gender, SensitiveAttribute::Age] {
        let t = Instant::now();
        let model = train(data, &TrainConfig { sensitive_attribute: attr, ..base.clone() })?;
        let report = evaluate(&model.params, data, SplitTag::Test, base.threshold)?;
        println!("{}: selected epoch {} ({:.1}s)", attr.arm_name(), model.selected_epoch, t.elapsed().as_secs_f64());
        reports.push((attr.arm_name(), report));
    }
    let named: Vec<(&str, &_)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    print!("{}", table3_csv(&named));
    let t2 = table2_csv(&named);
    for line in t2.lines().filter(|l| !l.starts_with(Attribute::Race.name())) {
        println!("{line}");
    }
    Ok(())
}
