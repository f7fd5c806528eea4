//! Labeled datasets and the on-disk prepared-cohort layout.
//!
//! A prepared directory holds:
//!
//! | file | content |
//! |------|---------|
//! | `features.txt` | `n_rows n_cols` header, then `row col` pairs |
//! | `numeric.tsv` | `row<TAB>col<TAB>value` for non-binary columns (standardized age) |
//! | `rows.tsv` | `row<TAB>patient_id` |
//! | `columns.tsv` | `col<TAB>concept`; the age column carries `mean` and `std` |
//! | `labels.tsv` | header + `row, patient_id, label, race, gender, age_group, age_years, followup_days, split` |
//! | `splits.tsv` | `patient_id<TAB>split` |

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::extract::{extract_features, FeatureRow};
use super::matrix::{CsrMatrix, NumericColumn, SparseFeatureMatrix};
use super::vocab::{build_vocabulary, Concept, Vocabulary};
use crate::cohort::{split_cohort, Attribute, Domain, ExtractedPatient, GroupAssignment, SplitTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: CsrMatrix,
    pub labels: Vec<u8>,
    pub groups: Vec<GroupAssignment>,
    pub splits: Vec<SplitTag>,
    pub row_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols
    }

    pub fn rows_in(&self, split: SplitTag) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.splits[r] == split).collect()
    }

    pub fn group(&self, row: usize, attribute: Attribute) -> usize {
        self.groups[row].get(attribute)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.n_rows;
        if [self.labels.len(), self.groups.len(), self.splits.len(), self.row_ids.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Contract("dataset columns have inconsistent lengths".into()));
        }
        if self.labels.iter().any(|&y| y > 1) {
            return Err(Error::validation("labels", "must be 0 or 1"));
        }
        Ok(())
    }
}

/// Everything the prepare step produces.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub dataset: LabeledDataset,
    pub matrix: SparseFeatureMatrix,
    pub vocabulary: Vocabulary,
    pub ages: Vec<i32>,
    pub followup_days: Vec<i64>,
}

/// Split the extracted cohort, fit the vocabulary on the training split and
/// featurize every patient.
pub fn prepare_dataset(
    patients: &[ExtractedPatient],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<PreparedCohort> {
    let positions: Vec<usize> = (0..patients.len()).collect();
    let parts = split_cohort(&positions, ratios, seed)?;
    let mut splits = vec![SplitTag::Train; patients.len()];
    for &i in &parts.val {
        splits[i] = SplitTag::Val;
    }
    for &i in &parts.test {
        splits[i] = SplitTag::Test;
    }
    let train: Vec<_> = parts.train.iter().map(|&i| patients[i].indexed.clone()).collect();
    let vocabulary = build_vocabulary(&train, true)?;
    let rows: Vec<FeatureRow> = {
        use rayon::prelude::*;
        patients.par_iter().map(|p| extract_features(&p.indexed, &vocabulary)).collect()
    };
    let row_ids: Vec<String> = patients.iter().map(|p| p.indexed.patient.patient_id.clone()).collect();
    let matrix = SparseFeatureMatrix::from_rows(&rows, row_ids.clone(), vocabulary.n_cols())?;
    let dataset = LabeledDataset {
        features: matrix.to_csr(),
        labels: patients.iter().map(|p| p.label).collect(),
        groups: patients.iter().map(|p| p.groups).collect(),
        splits,
        row_ids,
    };
    Ok(PreparedCohort {
        dataset,
        matrix,
        vocabulary,
        ages: patients.iter().map(|p| p.indexed.age_at_index()).collect(),
        followup_days: patients.iter().map(|p| p.indexed.followup_days()).collect(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

impl PreparedCohort {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.matrix.write_coords(&dir.join("features.txt"))?;

        let mut numeric = String::new();
        for col in &self.matrix.numeric {
            for (r, v) in col.values.iter().enumerate() {
                numeric.push_str(&format!("{r}\t{}\t{v}\n", col.col));
            }
        }
        write_text(&dir.join("numeric.tsv"), &numeric)?;

        let rows: String = self.dataset.row_ids.iter().enumerate().map(|(r, id)| format!("{r}\t{id}\n")).collect();
        write_text(&dir.join("rows.tsv"), &rows)?;

        let mut columns = String::new();
        for (c, name) in self.vocabulary.column_names().iter().enumerate() {
            columns.push_str(&format!("{c}\t{name}"));
            if let Some(d) = self.vocabulary.demographics() {
                if c as u32 == d.age_col() {
                    columns.push_str(&format!("\tmean={}\tstd={}", d.age_mean, d.age_std));
                }
            }
            columns.push('\n');
        }
        write_text(&dir.join("columns.tsv"), &columns)?;

        let mut labels =
            String::from("row\tpatient_id\tlabel\trace\tgender\tage_group\tage_years\tfollowup_days\tsplit\n");
        let ds = &self.dataset;
        for r in 0..ds.n_rows() {
            let g = ds.groups[r];
            labels.push_str(&format!(
                "{r}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                ds.row_ids[r], ds.labels[r], g.race_group, g.gender_group, g.age_group, self.ages[r],
                self.followup_days[r], ds.splits[r]
            ));
        }
        write_text(&dir.join("labels.tsv"), &labels)?;

        let splits: String = (0..ds.n_rows()).map(|r| format!("{}\t{}\n", ds.row_ids[r], ds.splits[r])).collect();
        write_text(&dir.join("splits.tsv"), &splits)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let coords_path = dir.join("features.txt");
        let (n_rows, n_cols, coords) = SparseFeatureMatrix::read_coords(&coords_path)?;

        let numeric_path = dir.join("numeric.tsv");
        let mut numeric: Vec<NumericColumn> = Vec::new();
        for (i, line) in read_text(&numeric_path)?.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || parse_err(&numeric_path, i + 1, "expected row<TAB>col<TAB>value");
            if f.len() != 3 {
                return Err(bad());
            }
            let r: usize = f[0].parse().map_err(|_| bad())?;
            let c: u32 = f[1].parse().map_err(|_| bad())?;
            let v: f64 = f[2].parse().map_err(|_| bad())?;
            if r >= n_rows || c as usize >= n_cols {
                return Err(parse_err(&numeric_path, i + 1, "index out of range"));
            }
            let slot = match numeric.iter().position(|n| n.col == c) {
                Some(s) => s,
                None => {
                    numeric.push(NumericColumn { col: c, values: vec![0.0; n_rows] });
                    numeric.len() - 1
                }
            };
            numeric[slot].values[r] = v;
        }

        let labels_path = dir.join("labels.tsv");
        let text = read_text(&labels_path)?;
        let mut ds_labels = Vec::with_capacity(n_rows);
        let mut groups = Vec::with_capacity(n_rows);
        let mut splits = Vec::with_capacity(n_rows);
        let mut row_ids = Vec::with_capacity(n_rows);
        let mut ages = Vec::with_capacity(n_rows);
        let mut followup_days = Vec::with_capacity(n_rows);
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = |what: &str| parse_err(&labels_path, i + 1, format!("bad {what}"));
            if f.len() != 9 {
                return Err(bad("field count"));
            }
            if f[0].parse::<usize>().ok() != Some(row_ids.len()) {
                return Err(bad("row index"));
            }
            row_ids.push(f[1].to_string());
            ds_labels.push(f[2].parse::<u8>().map_err(|_| bad("label"))?);
            let race_group: usize = f[3].parse().map_err(|_| bad("race"))?;
            let gender_group: usize = f[4].parse().map_err(|_| bad("gender"))?;
            let age_group: usize = f[5].parse().map_err(|_| bad("age_group"))?;
            if race_group >= 6 || gender_group >= 2 || age_group >= 4 {
                return Err(bad("group id"));
            }
            groups.push(GroupAssignment { race_group, gender_group, age_group });
            ages.push(f[6].parse::<i32>().map_err(|_| bad("age_years"))?);
            followup_days.push(f[7].parse::<i64>().map_err(|_| bad("followup_days"))?);
            splits.push(f[8].parse::<SplitTag>()?);
        }
        if row_ids.len() != n_rows {
            return Err(parse_err(&labels_path, 0, format!("{} label rows for {n_rows} feature rows", row_ids.len())));
        }

        let vocabulary = read_vocabulary(&dir.join("columns.tsv"))?;
        if vocabulary.n_cols() != n_cols {
            return Err(Error::Contract(format!(
                "columns.tsv describes {} columns, features.txt has {n_cols}",
                vocabulary.n_cols()
            )));
        }
        let matrix = SparseFeatureMatrix {
            n_rows,
            n_cols,
            coords,
            numeric,
            row_ids: row_ids.clone(),
        };
        let dataset = LabeledDataset {
            features: matrix.to_csr(),
            labels: ds_labels,
            groups,
            splits,
            row_ids,
        };
        dataset.validate()?;
        Ok(PreparedCohort { dataset, matrix, vocabulary, ages, followup_days })
    }
}

fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = read_text(path)?;
    let mut concepts = BTreeSet::new();
    let mut demographics = None;
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 {
            return Err(parse_err(path, i + 1, "expected col<TAB>concept"));
        }
        if f[1] == "demographic:age" {
            let field = |k: &str| -> Result<f64> {
                f.iter()
                    .find_map(|s| s.strip_prefix(k))
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(path, i + 1, format!("missing {k}")))
            };
            demographics = Some((field("mean=")?, field("std=")?));
        } else if f[1].starts_with("demographic:") {
            continue;
        } else {
            let (domain, code) = f[1]
                .split_once(':')
                .and_then(|(d, c)| Some((Domain::from_name(d)?, c)))
                .ok_or_else(|| parse_err(path, i + 1, "expected Domain:code"))?;
            concepts.insert(Concept { domain, code: code.to_string() });
        }
    }
    Ok(Vocabulary::from_concepts(concepts, demographics))
}
