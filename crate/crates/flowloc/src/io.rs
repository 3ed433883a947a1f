//! On-disk formats and the output directory layout.
//!
//! | file | format |
//! |---|---|
//! | vasculature, profiles | TOML |
//! | raw and transformed datasets | JSON lines: a header, then one report per line |
//! | visit probabilities, anchor features, input graphs, checkpoints, evaluations | JSON |
//! | training history, leaderboards, reports | tab-separated text (plus SVG figures) |

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flowloc_core::features::{AnchorFeatures, GraphDesign, InputGraph, Standardization};
use flowloc_core::gnn::{EpochRecord, LeaderboardEntry, ModelParams};
use flowloc_core::mobility_sim::{DatasetKey, EventSpec, RawDataset, ReportRecord, SimulationConfig, RAW_DATASET_SCHEMA_VERSION};
use flowloc_core::profile_transform::ProfileSet;
use flowloc_core::vasculature::{ValidationOptions, VascularGraph, VasculatureSchema};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const INPUT_GRAPH_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// The bundled reference vasculature.
pub const REFERENCE_VASCULATURE: &str = include_str!("../data/reference_vasculature.toml");
/// The bundled nine patient profiles.
pub const REFERENCE_PROFILES: &str = include_str!("../data/profiles.toml");

pub fn parse_vasculature(text: &str, origin: &str) -> Result<VascularGraph> {
    let schema: VasculatureSchema = toml::from_str(text).map_err(|e| CliError::Data(format!("{origin}: {e}")))?;
    Ok(VascularGraph::from_schema(schema, ValidationOptions::default())?)
}

pub fn load_vasculature(path: Option<&Path>) -> Result<VascularGraph> {
    match path {
        None => parse_vasculature(REFERENCE_VASCULATURE, "bundled vasculature"),
        Some(p) => parse_vasculature(&read_text(p)?, &p.display().to_string()),
    }
}

pub fn parse_profiles(text: &str, origin: &str) -> Result<ProfileSet> {
    let set: ProfileSet = toml::from_str(text).map_err(|e| CliError::Data(format!("{origin}: {e}")))?;
    set.validate()?;
    Ok(set)
}

pub fn load_profiles(path: Option<&Path>) -> Result<ProfileSet> {
    match path {
        None => parse_profiles(REFERENCE_PROFILES, "bundled profiles"),
        Some(p) => parse_profiles(&read_text(p)?, &p.display().to_string()),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(CliError::Data(format!("{} is missing", path.display())));
    }
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub key: DatasetKey,
    pub profile: String,
    pub event: EventSpec,
    pub config: SimulationConfig,
    pub records: usize,
}

pub fn write_dataset(path: &Path, d: &RawDataset) -> Result<()> {
    create_parent(path)?;
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = DatasetHeader {
        schema_version: RAW_DATASET_SCHEMA_VERSION,
        key: d.key,
        profile: d.profile.clone(),
        event: d.event,
        config: d.config.clone(),
        records: d.records.len(),
    };
    let io = |e: std::io::Error| CliError::io(path, e);
    let json = |e: serde_json::Error| CliError::Data(e.to_string());
    serde_json::to_writer(&mut w, &header).map_err(json)?;
    w.write_all(b"\n").map_err(io)?;
    for r in &d.records {
        serde_json::to_writer(&mut w, r).map_err(json)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<RawDataset> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, e: &dyn std::fmt::Display| CliError::Data(format!("{}:{line}: {e}", path.display()));
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().ok_or_else(|| bad(1, &"empty file"))?.map_err(|e| CliError::io(path, e))?;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| bad(1, &e))?;
    if header.schema_version != RAW_DATASET_SCHEMA_VERSION {
        return Err(bad(1, &format!("unsupported schema_version {}", header.schema_version)));
    }
    let mut records = Vec::with_capacity(header.records);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<ReportRecord>(&line).map_err(|e| bad(i + 2, &e))?);
    }
    if records.len() != header.records {
        return Err(bad(1, &format!("header announces {} records, found {}", header.records, records.len())));
    }
    Ok(RawDataset { key: header.key, profile: header.profile, event: header.event, config: header.config, records })
}

/// Anchor descriptor of one dataset under one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub key: DatasetKey,
    pub profile: String,
    pub event: EventSpec,
    pub features: AnchorFeatures,
}

/// Serialized input graph. Features are stored raw; `standardization` is set
/// only on graphs written after standardizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub schema_version: u32,
    pub key: DatasetKey,
    pub profile: String,
    pub event: EventSpec,
    pub standardization: Option<Standardization>,
    pub graph: InputGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub design: GraphDesign,
    pub train_seed: u64,
    pub profiles: Vec<String>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_val_loss: f64,
    /// Applied to every graph before inference; `None` for raw features.
    pub standardization: Option<Standardization>,
    pub model: ModelParams,
}

pub fn history_tsv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tval_loss\tval_accuracy\tmax_grad_norm\n");
    for e in history {
        s += &format!("{}\t{}\t{}\t{}\t{}\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy, e.max_grad_norm);
    }
    s
}

pub fn leaderboard_tsv(board: &[LeaderboardEntry]) -> String {
    let mut s = String::from(
        "rank\tbest_val_accuracy\tbest_val_loss\tbest_epoch\thidden_channels\thgt_heads\tgat_heads\thgt_layers\tfirst_layers\tlast_layers\tconv_type\tlearning_rate\tweight_decay\tmax_grad_norm\n",
    );
    for e in board {
        let h = &e.hyper;
        s += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.rank,
            e.best_val_accuracy,
            e.best_val_loss,
            e.best_epoch,
            h.hidden_channels,
            h.hgt_heads,
            h.gat_heads,
            h.hgt_layers,
            h.first_layers,
            h.last_layers,
            h.conv_type,
            h.learning_rate,
            h.weight_decay,
            h.max_grad_norm
        );
    }
    s
}

/// Paths inside an output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn abs(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn raw(key: &DatasetKey) -> String {
        format!("raw/{}.jsonl", key.label())
    }

    pub fn probs() -> String {
        "probs.json".into()
    }

    pub fn transformed(profile: &str, key: &DatasetKey) -> String {
        format!("transformed/{profile}/{}.jsonl", key.label())
    }

    pub fn features(profile: &str, key: &DatasetKey) -> String {
        format!("features/{profile}/{}.json", key.label())
    }

    pub fn graph(design: GraphDesign, profile: &str, key: &DatasetKey) -> String {
        format!("graphs/{design}/{profile}/{}.json", key.label())
    }

    pub fn checkpoint(design: GraphDesign) -> String {
        format!("models/{design}/checkpoint.json")
    }

    pub fn history(design: GraphDesign) -> String {
        format!("models/{design}/history.tsv")
    }

    pub fn leaderboard(design: GraphDesign, ext: &str) -> String {
        format!("tune/{design}/leaderboard.{ext}")
    }

    pub fn evaluation(design: GraphDesign, profile: &str) -> String {
        format!("eval/{design}_{profile}.json")
    }

    /// `{design}_{profile}_{metric}.{ext}` under `reports/`.
    pub fn report(design: GraphDesign, profile: &str, metric: &str, ext: &str) -> String {
        format!("reports/{design}_{profile}_{metric}.{ext}")
    }

    pub fn manifest(command: &str) -> String {
        format!("manifests/{command}.json")
    }

    /// Relative paths of the files directly inside `dir` with extension `ext`, sorted.
    pub fn list(&self, dir: &str, ext: &str) -> Result<Vec<String>> {
        let abs = self.abs(dir);
        if !abs.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&abs).map_err(|e| CliError::io(&abs, e))? {
            let entry = entry.map_err(|e| CliError::io(&abs, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().extension().is_some_and(|x| x == ext) {
                out.push(format!("{dir}/{name}"));
            }
        }
        out.sort();
        Ok(out)
    }
}
