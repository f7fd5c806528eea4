//! Code lists for exclusion and outcome rules.
//!
//! File format: UTF-8, one code per line, `#` starts a comment, blank lines
//! ignored. Codes are compared by exact string equality after trimming.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

pub const CVD_EXCLUSION_FILE: &str = "cvd_exclusion_icd9.txt";
pub const LIPID_LOWERING_FILE: &str = "lipid_lowering_atc.txt";
pub const ASCVD_OUTCOME_FILE: &str = "ascvd_outcome_icd9.txt";
pub const FATAL_CHD_FILE: &str = "fatal_chd_icd9.txt";

const CVD_EXCLUSION_TEXT: &str = include_str!("../../data/codelists/cvd_exclusion_icd9.txt");
const LIPID_LOWERING_TEXT: &str = include_str!("../../data/codelists/lipid_lowering_atc.txt");
const ASCVD_OUTCOME_TEXT: &str = include_str!("../../data/codelists/ascvd_outcome_icd9.txt");
const FATAL_CHD_TEXT: &str = include_str!("../../data/codelists/fatal_chd_icd9.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeList {
    pub name: String,
    codes: BTreeSet<String>,
    pub match_mode: MatchMode,
}

impl CodeList {
    pub fn new<I, S>(name: impl Into<String>, codes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut set = BTreeSet::new();
        for c in codes {
            let c = c.as_ref().trim();
            if c.is_empty() {
                return Err(Error::validation(format!("code list {name}"), "empty code"));
            }
            if !set.insert(c.to_string()) {
                return Err(Error::validation(
                    format!("code list {name}"),
                    format!("duplicate code {c}"),
                ));
            }
        }
        if set.is_empty() {
            return Err(Error::validation(format!("code list {name}"), "no codes"));
        }
        Ok(CodeList {
            name,
            codes: set,
            match_mode: MatchMode::Exact,
        })
    }

    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let codes = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        CodeList::new(name, codes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        CodeList::parse(&name, &text)
    }

    pub fn contains(&self, code: &str) -> bool {
        match self.match_mode {
            MatchMode::Exact => self.codes.contains(code.trim()),
        }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(String::as_str)
    }
}

/// The four lists the cohort rules need.
#[derive(Debug, Clone)]
pub struct CohortCodes {
    /// Prior cardiovascular disease diagnoses (ICD-9-CM); any lookback.
    pub cvd_exclusion: CodeList,
    /// Lipid-lowering medications (ATC); five-year lookback.
    pub lipid_lowering: CodeList,
    /// Myocardial infarction and stroke (ICD-9-CM).
    pub ascvd: CodeList,
    /// Coronary heart disease codes that count when death follows within a year.
    pub fatal_chd: CodeList,
}

impl CohortCodes {
    /// The shipped lists compiled into the library.
    pub fn builtin() -> Self {
        CohortCodes {
            cvd_exclusion: CodeList::parse("cvd_exclusion_icd9", CVD_EXCLUSION_TEXT)
                .expect("shipped list"),
            lipid_lowering: CodeList::parse("lipid_lowering_atc", LIPID_LOWERING_TEXT)
                .expect("shipped list"),
            ascvd: CodeList::parse("ascvd_outcome_icd9", ASCVD_OUTCOME_TEXT).expect("shipped list"),
            fatal_chd: CodeList::parse("fatal_chd_icd9", FATAL_CHD_TEXT).expect("shipped list"),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        Ok(CohortCodes {
            cvd_exclusion: CodeList::load(&dir.join(CVD_EXCLUSION_FILE))?,
            lipid_lowering: CodeList::load(&dir.join(LIPID_LOWERING_FILE))?,
            ascvd: CodeList::load(&dir.join(ASCVD_OUTCOME_FILE))?,
            fatal_chd: CodeList::load(&dir.join(FATAL_CHD_FILE))?,
        })
    }
}
