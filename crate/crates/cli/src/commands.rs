use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use eqodds::cohort::io::{read_records, write_records};
use eqodds::cohort::{extract_cohort, generate_synthetic_cohort, Attribute, CohortCodes, ExtractedPatient, SplitTag};
use eqodds::features::{prepare_dataset, PreparedCohort};
use eqodds::metrics::{table2_csv, table3_csv, table4_csv, FairnessReport};
use eqodds::neural::checkpoint;
use eqodds::trainer::{evaluate as evaluate_split, random_search, train as train_arm, SensitiveAttribute, TrainConfig};
use eqodds::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfigFile;

/// Metadata stored next to the parameters in a checkpoint.
#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    arm: String,
    selected_epoch: usize,
    config: TrainConfig,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Table 1 layout: one row per group of each attribute, then "All".
fn cohort_summary(patients: &[ExtractedPatient]) -> String {
    #[derive(Default, Clone, Copy)]
    struct Acc {
        n: usize,
        pos: usize,
        days: i64,
    }
    let add = |a: &mut Acc, p: &ExtractedPatient| {
        a.n += 1;
        a.pos += p.label as usize;
        a.days += p.indexed.followup_days();
    };
    let mut out = String::from("group,count,incidence,mean_followup_years\n");
    let row = |out: &mut String, name: &str, a: Acc| {
        if a.n == 0 {
            let _ = writeln!(out, "{name},0,undefined,undefined");
        } else {
            let inc = a.pos as f64 / a.n as f64;
            let years = a.days as f64 / a.n as f64 / 365.25;
            let _ = writeln!(out, "{name},{},{inc:.5},{years:.2}", a.n);
        }
    };
    for attr in Attribute::ALL {
        let mut acc = vec![Acc::default(); attr.group_count()];
        for p in patients {
            add(&mut acc[p.groups.get(attr)], p);
        }
        for (name, a) in attr.group_names().iter().zip(acc) {
            row(&mut out, name, a);
        }
    }
    let mut all = Acc::default();
    for p in patients {
        add(&mut all, p);
    }
    row(&mut out, "All", all);
    out
}

pub fn generate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let file = RunConfigFile::load_or_default(config)?;
    let mut cfg = file.cohort;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let records = generate_synthetic_cohort(&cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_records(out, &records)?;
    log::info!("wrote {} records to {}", records.len(), out.display());

    let codes = load_codes(file.prepare.code_lists.as_deref())?;
    let extraction = extract_cohort(&records, &codes, cfg.seed)?;
    print!("{}", cohort_summary(&extraction.patients));
    Ok(())
}

fn load_codes(dir: Option<&Path>) -> Result<CohortCodes> {
    match dir {
        Some(d) => CohortCodes::load_dir(d),
        None => Ok(CohortCodes::builtin()),
    }
}

pub fn prepare(records: &Path, codes: Option<&Path>, out: &Path, seed: u64, config: Option<&Path>) -> Result<()> {
    let file = RunConfigFile::load_or_default(config)?;
    let codes = load_codes(codes.or(file.prepare.code_lists.as_deref()))?;
    let records = read_records(records)?;
    let extraction = extract_cohort(&records, &codes, seed)?;
    let f = extraction.funnel;
    println!("input,eligible,post_exclusion");
    println!("{},{},{}", f.input, f.eligible, f.post_exclusion);
    create_dir(out)?;
    if extraction.patients.is_empty() {
        log::warn!("no patients left after extraction; nothing written to {}", out.display());
        return Ok(());
    }
    let [a, b, c] = file.prepare.ratios;
    let prepared = prepare_dataset(&extraction.patients, (a, b, c), seed)?;
    prepared.write(out)
}

fn read_prepared(dir: &Path) -> Result<PreparedCohort> {
    if !dir.join("labels.tsv").exists() {
        return Err(Error::validation("prepared", format!("{} holds no prepared cohort", dir.display())));
    }
    PreparedCohort::read(dir)
}

pub fn train(
    prepared: &Path,
    attr: SensitiveAttribute,
    lambda: Option<f64>,
    seed: Option<u64>,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let file = RunConfigFile::load_or_default(config)?;
    let mut cfg = TrainConfig { sensitive_attribute: attr, ..file.train };
    if let Some(l) = lambda {
        cfg.lambda = l;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if attr.attribute().is_some() && !(cfg.lambda > 0.0) {
        return Err(Error::validation("lambda", "must be a positive scalar for an adversarial arm"));
    }
    cfg.validate()?;
    let data = read_prepared(prepared)?;
    let model = train_arm(&data.dataset, &cfg)?;
    create_dir(out)?;
    let meta = CheckpointMeta { arm: attr.arm_name(), selected_epoch: model.selected_epoch, config: cfg };
    let meta = serde_json::to_string(&meta).expect("checkpoint metadata serializes");
    checkpoint::save(&out.join("checkpoint.bin"), &model.params, &meta)?;
    write_file(&out.join("manifest.txt"), model.manifest())?;
    write_file(&out.join("validation_report.txt"), model.validation_report.to_text())?;
    log::info!("{} selected epoch {}", attr.arm_name(), model.selected_epoch);
    Ok(())
}

pub fn evaluate(checkpoints: &[PathBuf], prepared: &Path, split: SplitTag, threshold: f64, out: &Path) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::validation("threshold", format!("{threshold} is not in (0, 1)")));
    }
    let data = read_prepared(prepared)?;
    let mut reports: Vec<(String, FairnessReport)> = Vec::new();
    for path in checkpoints {
        let (params, meta) = checkpoint::load(path)?;
        let meta: CheckpointMeta = serde_json::from_str(&meta).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            reason: format!("checkpoint metadata: {e}"),
        })?;
        if params.spec.input_dim != data.dataset.n_cols() {
            return Err(Error::validation(
                "checkpoint",
                format!(
                    "{} expects {} features, prepared cohort has {}",
                    path.display(),
                    params.spec.input_dim,
                    data.dataset.n_cols()
                ),
            ));
        }
        let report = evaluate_split(&params, &data.dataset, split, threshold)?;
        let mut name = meta.arm;
        let dupes = reports.iter().filter(|(n, _)| n == &name || n.starts_with(&format!("{name}_"))).count();
        if dupes > 0 {
            name = format!("{name}_{}", dupes + 1);
        }
        reports.push((name, report));
    }
    create_dir(out)?;
    for (name, report) in &reports {
        write_file(&out.join(format!("report_{name}.txt")), report.to_text())?;
        write_file(&out.join(format!("histograms_{name}.csv")), report.histogram_csv())?;
    }
    let named: Vec<(&str, &FairnessReport)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    write_file(&out.join("table2.csv"), table2_csv(&named))?;
    write_file(&out.join("table3.csv"), table3_csv(&named))?;
    write_file(&out.join("table4.csv"), table4_csv(&named))
}

pub fn search(
    prepared: &Path,
    grid: Option<&Path>,
    trials: Option<usize>,
    attr: SensitiveAttribute,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let file = RunConfigFile::load_or_default(grid)?;
    let mut grid = file.search;
    if let Some(n) = trials {
        grid.n_trials = n;
    }
    let base = TrainConfig { sensitive_attribute: attr, ..file.train };
    let data = read_prepared(prepared)?;
    let result = random_search(&grid, &data.dataset, &base, seed)?;
    create_dir(out)?;
    let csv = result.to_csv();
    if let Some(&best) = result.ranking.first() {
        log::info!("best trial {best}");
    }
    write_file(&out.join("trials.csv"), csv)?;
    for t in &result.trials {
        let dir = out.join(format!("trial_{:03}", t.trial));
        create_dir(&dir)?;
        let manifest = match &t.outcome {
            Ok(m) => m.manifest(),
            Err(e) => {
                let mut s = format!("arm = {}\nseed = {}\n", t.config.sensitive_attribute.arm_name(), t.config.seed);
                for line in t.config.manifest_lines() {
                    let _ = writeln!(s, "{line}");
                }
                let _ = writeln!(s, "status = failed: {e}");
                s
            }
        };
        write_file(&dir.join("manifest.txt"), manifest)?;
    }
    Ok(())
}
