use serde::Serialize;

use super::config::config_hash;
use super::report::{Field, Record};
use crate::VERSION;

/// Provenance record written first in every machine-readable output.
///
/// Wall time is recorded only on request so that repeated runs stay
/// byte-identical by default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub wall_time_s: Option<f64>,
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, settings: &T, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash(settings),
            seed,
            version: VERSION.into(),
            outputs: Vec::new(),
            wall_time_s: None,
        }
    }

    pub fn record(&self) -> Record {
        let mut r = Record::new("manifest")
            .str("command", self.command.clone())
            .str("config_hash", self.config_hash.clone())
            .with("seed", self.seed.map_or(Field::Null, Field::Int))
            .str("version", self.version.clone())
            .with("outputs", Field::List(self.outputs.clone()));
        if let Some(t) = self.wall_time_s {
            r = r.num("wall_time_s", t);
        }
        r
    }
}
