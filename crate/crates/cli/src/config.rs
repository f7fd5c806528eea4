use std::fs;
use std::path::{Path, PathBuf};

use eqodds::cohort::{SyntheticCohortConfig, DEFAULT_RATIOS};
use eqodds::trainer::{SearchGrid, TrainConfig};
use eqodds::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareSection {
    /// Train/validation/test fractions.
    pub ratios: [f64; 3],
    /// Directory with the four code-list files; the shipped lists when absent.
    pub code_lists: Option<PathBuf>,
}

impl Default for PrepareSection {
    fn default() -> Self {
        let (a, b, c) = DEFAULT_RATIOS;
        PrepareSection { ratios: [a, b, c], code_lists: None }
    }
}

/// The whole run configuration. Every section and key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub cohort: SyntheticCohortConfig,
    pub prepare: PrepareSection,
    pub train: TrainConfig,
    pub search: SearchGrid,
}

impl RunConfigFile {
    /// Parse a TOML file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfigFile = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            reason: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(dir) = &cfg.prepare.code_lists {
            if dir.is_relative() {
                cfg.prepare.code_lists = Some(base.join(dir));
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfigFile::default()), RunConfigFile::load)
    }
}
