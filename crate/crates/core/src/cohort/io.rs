//! Line-delimited patient records and split files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::split::SplitTag;
use super::types::PatientRecord;
use crate::error::{Error, Result};

pub fn write_records(path: &Path, records: &[PatientRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<PatientRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: PatientRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        if rec.events.iter().any(|e| e.code.trim().is_empty()) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                reason: "event with empty code".into(),
            });
        }
        if !rec.events_sorted() {
            rec.sort_events();
        }
        out.push(rec);
    }
    Ok(out)
}

/// `patient_id<TAB>split` per line.
pub fn write_split_file(path: &Path, rows: &[(String, SplitTag)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, tag) in rows {
        writeln!(w, "{id}\t{tag}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_split_file(path: &Path) -> Result<Vec<(String, SplitTag)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (id, tag) = l.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                reason: "expected patient_id<TAB>split".into(),
            })?;
            Ok((id.to_string(), tag.trim().parse()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::generate::{generate_synthetic_cohort, SyntheticCohortConfig};

    #[test]
    fn records_survive_a_file_round_trip() {
        let cfg = SyntheticCohortConfig {
            n_patients: 25,
            ..SyntheticCohortConfig::table1()
        };
        let recs = generate_synthetic_cohort(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_records(&path, &recs).unwrap();
        assert_eq!(read_records(&path).unwrap(), recs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 25);
        assert!(text.contains("\"birth_date\":\""));
    }

    #[test]
    fn split_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        let rows = vec![("a".to_string(), SplitTag::Train), ("b".to_string(), SplitTag::Test)];
        write_split_file(&path, &rows).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a\ttrain\nb\ttest\n");
        assert_eq!(read_split_file(&path).unwrap(), rows);
    }
}
