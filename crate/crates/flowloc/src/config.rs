//! Run configuration: one TOML file, overridable from the command line.
//!
//! Precedence is flags, then the file, then built-in defaults. A manifest
//! written by a previous run (`manifests/<command>.json`) is accepted wherever
//! a config file is, and reproduces that run.

use std::path::{Path, PathBuf};

use flowloc_core::features::{BuildOptions, EmSettings, GraphDesign};
use flowloc_core::gnn::{Hyperparams, LossKind, SearchSpace};
use flowloc_core::mobility_sim::SimulationConfig;
use flowloc_core::profile_transform::ProfileSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; every stage derives its own streams from it.
    pub seed: u64,
    pub paths: Paths,
    pub simulation: SimulationSection,
    pub features: FeatureSection,
    pub designs: Vec<GraphDesign>,
    /// Profile names, or `["all"]`.
    pub profiles: Vec<String>,
    pub training: TrainingSection,
    pub tune: TuneSection,
    pub evaluate: EvaluateSection,
    pub stages: Stages,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            simulation: SimulationSection::default(),
            features: FeatureSection::default(),
            designs: vec![GraphDesign::Baseline, GraphDesign::C],
            profiles: vec!["all".into()],
            training: TrainingSection::default(),
            tune: TuneSection::default(),
            evaluate: EvaluateSection::default(),
            stages: Stages::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Vasculature TOML; the bundled reference body when absent.
    pub vasculature: Option<PathBuf>,
    /// Profile set TOML; the bundled nine profiles when absent.
    pub profiles: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { vasculature: None, profiles: None, out: PathBuf::from("flowloc-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub num_nanodevices: u32,
    pub sim_time: f64,
    pub sampling_rate: f64,
    pub detection_threshold: f64,
    pub report_success_prob: f64,
    pub events_per_region: u32,
    /// Random walks for the visit-probability estimate.
    pub probability_walks: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimulationConfig::default();
        Self {
            num_nanodevices: d.num_nanodevices,
            sim_time: d.sim_time,
            sampling_rate: d.sampling_rate,
            detection_threshold: d.detection_threshold,
            report_success_prob: d.report_success_prob,
            events_per_region: 2,
            probability_walks: 10_000,
        }
    }
}

impl SimulationSection {
    pub fn to_core(&self, seed: u64) -> SimulationConfig {
        SimulationConfig {
            num_nanodevices: self.num_nanodevices,
            sim_time: self.sim_time,
            sampling_rate: self.sampling_rate,
            detection_threshold: self.detection_threshold,
            report_success_prob: self.report_success_prob,
            seed,
            retain_positions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub em: EmSettings,
    pub undirected_probability_edges: bool,
    /// Z-score node features with training-set statistics.
    pub standardize: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { em: EmSettings::default(), undirected_probability_edges: false, standardize: true }
    }
}

impl FeatureSection {
    pub fn build_options(&self) -> BuildOptions {
        BuildOptions { undirected_probability_edges: self.undirected_probability_edges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub hyper: Hyperparams,
    /// Take the hyperparameters from the leaderboard written by `tune`.
    pub use_tuned: bool,
    pub epochs: usize,
    pub patience: Option<usize>,
    pub loss: LossKind,
    /// Events with a lower index train the model; the rest are held out.
    pub train_events: u32,
    /// Share of the training graphs, per region, used for checkpoint selection.
    pub val_fraction: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            use_tuned: false,
            epochs: 300,
            patience: Some(30),
            loss: LossKind::Bce,
            train_events: 1,
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub budget: usize,
    pub space: SearchSpace,
    /// Epoch cap per candidate; the training section's value when absent.
    pub epochs: Option<usize>,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self { budget: 8, space: SearchSpace::default(), epochs: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub point_estimate: flowloc_core::eval::PointEstimate,
}

/// Which stages `flowloc run` executes, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub simulate: bool,
    pub probs: bool,
    pub transform: bool,
    pub featurize: bool,
    pub tune: bool,
    pub train: bool,
    pub evaluate: bool,
    pub report: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self { simulate: true, probs: true, transform: true, featurize: true, tune: false, train: true, evaluate: true, report: true }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub designs: Option<Vec<GraphDesign>>,
    pub profiles: Option<Vec<String>>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a TOML config or the `config` field of a JSON manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            let m: crate::manifest::Manifest =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            m.config
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.designs {
            self.designs = d.clone();
        }
        if let Some(p) = &o.profiles {
            self.profiles = p.clone();
        }
        if let Some(out) = &o.out {
            self.paths.out = out.clone();
        }
    }

    /// Checks everything that does not need the data directory.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.paths.vasculature, &self.paths.profiles].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        self.simulation.to_core(self.seed).validate()?;
        if self.simulation.events_per_region == 0 {
            return Err(CliError::Config("simulation.events_per_region must be at least 1".into()));
        }
        if self.simulation.probability_walks == 0 {
            return Err(CliError::Config("simulation.probability_walks must be at least 1".into()));
        }
        if self.designs.is_empty() {
            return Err(CliError::Config("no graph designs selected".into()));
        }
        if self.profiles.is_empty() {
            return Err(CliError::Config("no profiles selected".into()));
        }
        if !(self.training.val_fraction > 0.0 && self.training.val_fraction < 1.0) {
            return Err(CliError::Config(format!("training.val_fraction = {} must lie in (0, 1)", self.training.val_fraction)));
        }
        if self.training.train_events == 0 || self.training.train_events > self.simulation.events_per_region {
            return Err(CliError::Config(format!(
                "training.train_events = {} must lie in 1..={}",
                self.training.train_events, self.simulation.events_per_region
            )));
        }
        self.training.hyper.validate_in(&SearchSpace::extended_depth())?;
        self.tune.space.validate()?;
        if self.tune.budget == 0 {
            return Err(CliError::Config("tune.budget must be at least 1".into()));
        }
        Ok(())
    }

    /// The selected profile names, resolved against `set` in set order.
    pub fn selected_profiles(&self, set: &ProfileSet) -> Result<Vec<String>> {
        if self.profiles.iter().any(|p| p == "all") {
            return Ok(set.profiles.iter().map(|p| p.name.clone()).collect());
        }
        for name in &self.profiles {
            set.get(name)?;
        }
        Ok(set.profiles.iter().filter(|p| self.profiles.contains(&p.name)).map(|p| p.name.clone()).collect())
    }
}
