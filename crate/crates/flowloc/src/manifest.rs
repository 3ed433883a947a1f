//! Per-command manifests: the resolved config, its hash, seeds, schema
//! versions and digests of every file read and written.
//!
//! Manifests carry no timestamps, so rerunning a command with the same
//! manifest reproduces it byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// sha256 of the config serialized as JSON.
    pub config_hash: String,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub schema_versions: BTreeMap<String, u32>,
    /// sha256 of the vasculature and profile texts in use.
    pub data: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn schema_versions() -> BTreeMap<String, u32> {
    BTreeMap::from([
        ("vasculature".to_string(), flowloc_core::vasculature::VASCULATURE_SCHEMA_VERSION),
        ("raw_dataset".to_string(), flowloc_core::mobility_sim::RAW_DATASET_SCHEMA_VERSION),
        ("profiles".to_string(), flowloc_core::profile_transform::PROFILE_SCHEMA_VERSION),
        ("input_graph".to_string(), crate::io::INPUT_GRAPH_SCHEMA_VERSION),
        ("checkpoint".to_string(), crate::io::CHECKPOINT_SCHEMA_VERSION),
    ])
}

impl Manifest {
    /// Builds the manifest of `command`, hashing `inputs` and `outputs`
    /// (paths relative to `root`, sorted).
    pub fn new(
        command: &str,
        cfg: &RunConfig,
        seeds: BTreeMap<String, u64>,
        data: BTreeMap<String, String>,
        root: &Path,
        inputs: &[String],
        outputs: &[String],
    ) -> Result<Self> {
        let digest = |list: &[String]| -> Result<Vec<FileDigest>> {
            let mut list = list.to_vec();
            list.sort();
            list.dedup();
            list.into_iter().map(|p| Ok(FileDigest { sha256: sha256_file(&root.join(&p))?, path: p })).collect()
        };
        Ok(Self {
            tool: "flowloc".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            seeds,
            schema_versions: schema_versions(),
            data,
            inputs: digest(inputs)?,
            outputs: digest(outputs)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_the_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
