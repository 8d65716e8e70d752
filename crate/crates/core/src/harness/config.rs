//! TOML run configuration.
//!
//! Keys mirror the long command-line flags with `-` replaced by `_`. Every key
//! is optional except `schema_version`, which must be `1`. Flags given on the
//! command line win over file values.
//!
//! ```toml
//! schema_version = 1
//! data = "trial.csv"
//! categorical = ["site"]
//! design = "complete"
//! methods = ["DM", "LOORA_DM"]
//! lambda = "auto:2"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RepsValue {
    Count(u64),
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: Option<u32>,
    pub data: Option<String>,
    pub delimiter: Option<String>,
    pub header: Option<bool>,
    pub y_col: Option<String>,
    pub d_col: Option<String>,
    pub y1_col: Option<String>,
    pub y0_col: Option<String>,
    pub p_col: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub categorical: Option<Vec<String>>,
    pub ignore: Option<Vec<String>>,
    pub drop_first: Option<bool>,
    pub design: Option<Vec<String>>,
    pub p: Option<f64>,
    pub nt: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub lambda: Option<String>,
    pub level: Option<f64>,
    pub reps: Option<RepsValue>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub intercept: Option<bool>,
    pub allow_design_mismatch: Option<bool>,
    pub population: Option<String>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub pop_seed: Option<u64>,
    pub out: Option<String>,
    pub csv: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: FileConfig = toml::from_str(text).map_err(|e| HarnessError::Schema(format!("config: {e}")))?;
        match cfg.schema_version {
            Some(SCHEMA_VERSION) => Ok(cfg),
            Some(v) => Err(HarnessError::Schema(format!(
                "config schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            ))),
            None => Err(HarnessError::Schema("config is missing schema_version".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Schema(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// SHA-256 of the canonical JSON form of `value`.
///
/// Object keys are sorted and floats use the shortest round-trip form, so the
/// digest depends only on the resolved settings, not on the platform or on how
/// they were spelled in the file.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).and_then(|v| serde_json::to_string(&v)).expect("settings serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
