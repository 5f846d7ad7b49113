use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to rerun a command bit-exactly, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub crate_version: String,
    pub archive_format: u16,
    pub parallel: bool,
    pub seeds: BTreeMap<String, u64>,
    pub timings: Vec<StageTiming>,
    /// Output path relative to the run directory, and its SHA-256.
    pub artifacts: BTreeMap<String, String>,
}
