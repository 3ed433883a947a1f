//! Nanodevice mobility and anchor reporting.
//!
//! Each nanodevice moves continuously along region polylines at the region's
//! blood speed. At the end of a region the next one is drawn among the
//! downstream neighbors (edge-weighted, uniform by default). The device samples
//! its surroundings on a global clock of `sampling_rate` Hz and latches its
//! event bit when it comes within `detection_threshold` of the event. Every
//! time it enters the anchor's heart region it tries to report; the attempt
//! succeeds with `report_success_prob`, after which the event bit and the
//! circulation timer are reset.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point3};
use crate::math;
use crate::rng::{self, StreamRng};
use crate::vasculature::VascularGraph;

/// Version of the serialized [`RawDataset`] layout.
pub const RAW_DATASET_SCHEMA_VERSION: u32 = 1;

const LOCATION_STREAM: u64 = 0x10c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub num_nanodevices: u32,
    /// s
    pub sim_time: f64,
    /// Hz
    pub sampling_rate: f64,
    /// cm
    pub detection_threshold: f64,
    pub report_success_prob: f64,
    pub seed: u64,
    /// Keep per-report position traces. Profile transformation needs them.
    #[serde(default = "yes")]
    pub retain_positions: bool,
}

fn yes() -> bool {
    true
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            num_nanodevices: 64,
            sim_time: 1100.0,
            sampling_rate: 3.0,
            detection_threshold: 1.0,
            report_success_prob: 0.75,
            seed: 0,
            retain_positions: true,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_nanodevices == 0 {
            return Err(Error::SimConfig("num_nanodevices must be positive".into()));
        }
        if !(self.sim_time.is_finite() && self.sim_time > 0.0) {
            return Err(Error::SimConfig("simulation time must be positive".into()));
        }
        if !(self.sampling_rate.is_finite() && self.sampling_rate > 0.0) {
            return Err(Error::SimConfig("sampling_rate must be positive".into()));
        }
        if !(self.detection_threshold.is_finite() && self.detection_threshold > 0.0) {
            return Err(Error::SimConfig("detection_threshold must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.report_success_prob) {
            return Err(Error::SimConfig("report_success_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub region_id: u32,
    pub location: Point3,
}

/// One position sample: time (s), position (cm), region id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub position: Point3,
    pub region: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub nanodevice_id: u32,
    pub event_bit: bool,
    /// Seconds since this device's previous successful report (or injection).
    pub circulation_time: f64,
    pub timestamp: f64,
    /// Samples from the previous report up to and including this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_positions: Option<Vec<Sample>>,
}

/// Identifies a dataset inside a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DatasetKey {
    pub region_id: u32,
    pub event_index: u32,
}

impl DatasetKey {
    pub fn label(&self) -> String {
        format!("r{:03}_e{}", self.region_id, self.event_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub key: DatasetKey,
    /// Profile the data was rescaled to; `original` straight out of the simulator.
    pub profile: String,
    pub event: EventSpec,
    pub config: SimulationConfig,
    pub records: Vec<ReportRecord>,
}

impl RawDataset {
    pub fn positive_records(&self) -> impl Iterator<Item = &ReportRecord> {
        self.records.iter().filter(|r| r.event_bit)
    }

    pub fn has_positions(&self) -> bool {
        self.records.iter().all(|r| r.raw_positions.is_some())
    }
}

/// Probability of visiting each region during one anchor-to-anchor iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitProbabilities {
    pub n_walks: u64,
    pub seed: u64,
    pub probs: BTreeMap<u32, f64>,
}

impl VisitProbabilities {
    pub fn get(&self, id: u32) -> Option<f64> {
        self.probs.get(&id).copied()
    }
}

fn choose_next(graph: &VascularGraph, idx: usize, rng: &mut StreamRng) -> usize {
    let nexts = graph.downstream_of_index(idx);
    if nexts.len() == 1 {
        return nexts[0].0;
    }
    let total: f64 = nexts.iter().map(|&(_, w)| w).sum();
    let mut r = rng.gen::<f64>() * total;
    for &(t, w) in nexts {
        if r < w {
            return t;
        }
        r -= w;
    }
    nexts[nexts.len() - 1].0
}

/// Simulates every nanodevice of `config` against one event.
pub fn simulate(graph: &VascularGraph, config: &SimulationConfig, event: &EventSpec) -> Result<RawDataset> {
    simulate_keyed(graph, config, event, DatasetKey { region_id: event.region_id, event_index: 0 })
}

pub fn simulate_keyed(
    graph: &VascularGraph,
    config: &SimulationConfig,
    event: &EventSpec,
    key: DatasetKey,
) -> Result<RawDataset> {
    config.validate()?;
    let node = graph.node(event.region_id)?;
    if !event.location.is_finite() || geometry::distance_to_path(&node.path, &event.location) > config.detection_threshold {
        return Err(Error::SimConfig(format!("event location is not on region {}", event.region_id)));
    }
    let mut records = Vec::new();
    for nd in 0..config.num_nanodevices {
        simulate_device(graph, config, event, nd, &mut records)?;
    }
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.nanodevice_id.cmp(&b.nanodevice_id)));
    Ok(RawDataset { key, profile: String::from("original"), event: *event, config: config.clone(), records })
}

fn simulate_device(
    graph: &VascularGraph,
    config: &SimulationConfig,
    event: &EventSpec,
    nd: u32,
    out: &mut Vec<ReportRecord>,
) -> Result<()> {
    let mut rng = rng::stream(config.seed, &[u64::from(nd)]);
    let rate = config.sampling_rate;
    let anchor = graph.index_of(graph.anchor_heart())?;
    let anchor_id = graph.anchor_heart();
    let anchor_entry = graph.nodes()[anchor].path[0];
    let keep = config.retain_positions;

    // Injection at the anchor heart, phase-shifted within one sampling period.
    let t0 = rng.gen::<f64>() / rate;
    let mut tick = math::ceil(t0 * rate) as u64;
    let mut t_enter = t0;
    let mut cur = anchor;
    let mut last_report = t0;
    let mut event_bit = false;
    let mut samples = Vec::new();
    if keep {
        samples.push(Sample { t: t0, position: anchor_entry, region: anchor_id });
    }

    while t_enter < config.sim_time {
        let node = &graph.nodes()[cur];
        let t_exit = t_enter + node.length / node.blood_speed;
        loop {
            let t = tick as f64 / rate;
            if t >= t_exit || t >= config.sim_time {
                break;
            }
            let pos = geometry::point_at(&node.path, (t - t_enter) * node.blood_speed);
            if pos.distance(&event.location) < config.detection_threshold {
                event_bit = true;
            }
            if keep && samples.last().map_or(true, |s: &Sample| t > s.t) {
                samples.push(Sample { t, position: pos, region: node.id });
            }
            tick += 1;
        }
        if t_exit > config.sim_time {
            break;
        }
        let next = choose_next(graph, cur, &mut rng);
        if next == anchor {
            let success = rng.gen::<f64>() < config.report_success_prob;
            if success {
                let raw_positions = if keep {
                    let end = Sample { t: t_exit, position: anchor_entry, region: anchor_id };
                    samples.push(end);
                    Some(core::mem::replace(&mut samples, vec![end]))
                } else {
                    None
                };
                out.push(ReportRecord {
                    nanodevice_id: nd,
                    event_bit,
                    circulation_time: t_exit - last_report,
                    timestamp: t_exit,
                    raw_positions,
                });
                last_report = t_exit;
                event_bit = false;
            }
        }
        cur = next;
        t_enter = t_exit;
    }
    Ok(())
}

/// Monte-Carlo estimate of per-region visit probability over one
/// anchor-to-anchor iteration. Heart regions are reported as 1.
pub fn estimate_visit_probabilities(graph: &VascularGraph, n_walks: u64, seed: u64) -> Result<VisitProbabilities> {
    if n_walks == 0 {
        return Err(Error::Empty("n_walks must be at least 1"));
    }
    let n = graph.len();
    let anchor = graph.index_of(graph.anchor_heart())?;
    let max_steps = 64 * n;
    let mut counts = vec![0u64; n];
    let mut seen = vec![u64::MAX; n];
    for w in 0..n_walks {
        let mut rng = rng::stream(seed, &[w]);
        let mut cur = anchor;
        seen[anchor] = w;
        let mut steps = 0;
        loop {
            cur = choose_next(graph, cur, &mut rng);
            if cur == anchor {
                break;
            }
            seen[cur] = w;
            steps += 1;
            if steps > max_steps {
                return Err(Error::Graph(format!("walk from the anchor heart did not return within {max_steps} steps")));
            }
        }
        for (i, s) in seen.iter().enumerate() {
            if *s == w {
                counts[i] += 1;
            }
        }
    }
    let hearts = graph.heart_ids();
    let probs = graph
        .nodes()
        .iter()
        .zip(&counts)
        .map(|(node, &c)| {
            let p = if hearts.contains(&node.id) { 1.0 } else { c as f64 / n_walks as f64 };
            (node.id, p)
        })
        .collect();
    Ok(VisitProbabilities { n_walks, seed, probs })
}

/// One planned benchmark simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkJob {
    pub key: DatasetKey,
    pub config: SimulationConfig,
    pub event: EventSpec,
}

/// Event placements and per-dataset seeds for a full benchmark: for every event
/// region, `events_per_region` locations drawn uniformly by arc length.
pub fn benchmark_plan(graph: &VascularGraph, config: &SimulationConfig, events_per_region: u32) -> Result<Vec<BenchmarkJob>> {
    if events_per_region == 0 {
        return Err(Error::Empty("events_per_region must be at least 1"));
    }
    config.validate()?;
    let mut jobs = Vec::new();
    for &rid in graph.event_region_ids() {
        let node = graph.node(rid)?;
        let mut rng = rng::stream(config.seed, &[LOCATION_STREAM, u64::from(rid)]);
        let mut used: Vec<f64> = Vec::new();
        for e in 0..events_per_region {
            let s = loop {
                let s = rng.gen::<f64>() * node.length;
                if !used.contains(&s) {
                    break s;
                }
            };
            used.push(s);
            let key = DatasetKey { region_id: rid, event_index: e };
            let mut cfg = config.clone();
            cfg.seed = rng::derive_seed(config.seed, &[u64::from(rid), u64::from(e)]);
            jobs.push(BenchmarkJob { key, config: cfg, event: EventSpec { region_id: rid, location: geometry::point_at(&node.path, s) } });
        }
    }
    Ok(jobs)
}

pub fn generate_benchmark(graph: &VascularGraph, config: &SimulationConfig, events_per_region: u32) -> Result<Vec<RawDataset>> {
    benchmark_plan(graph, config, events_per_region)?
        .iter()
        .map(|job| simulate_keyed(graph, &job.config, &job.event, job.key))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn lossless_single_cycle_reports_every_loop() {
        let g = fixtures::single_cycle(2.0);
        let cfg = SimulationConfig { num_nanodevices: 4, sim_time: 300.0, report_success_prob: 1.0, ..Default::default() };
        let ev = fixtures::event_on(&g, 3, 0.5);
        let d = simulate(&g, &cfg, &ev).unwrap();
        let loop_time = fixtures::cycle_length(&g) / 2.0;
        assert!(!d.records.is_empty());
        for r in &d.records {
            assert!((r.circulation_time - loop_time).abs() < 1e-9 * loop_time, "{}", r.circulation_time);
            // the event sits on the only loop and the device crawls past it
            assert!(r.event_bit);
        }
    }

    #[test]
    fn zero_success_means_no_records() {
        let g = fixtures::single_cycle(2.0);
        let cfg = SimulationConfig { num_nanodevices: 4, sim_time: 200.0, report_success_prob: 0.0, ..Default::default() };
        let d = simulate(&g, &cfg, &fixtures::event_on(&g, 3, 0.5)).unwrap();
        assert!(d.records.is_empty());
    }

    #[test]
    fn config_and_event_errors() {
        let g = fixtures::single_cycle(2.0);
        let ev = fixtures::event_on(&g, 3, 0.5);
        let cfg = SimulationConfig { sim_time: 0.0, ..Default::default() };
        assert!(matches!(simulate(&g, &cfg, &ev), Err(Error::SimConfig(_))));
        let bad = EventSpec { region_id: 42, location: ev.location };
        assert_eq!(simulate(&g, &SimulationConfig::default(), &bad), Err(Error::UnknownRegion(42)));
        let off = EventSpec { region_id: 3, location: Point3::new(500.0, 0.0, 0.0) };
        assert!(simulate(&g, &SimulationConfig::default(), &off).is_err());
    }

    #[test]
    fn timestamps_and_samples_increase_per_device() {
        let g = fixtures::fork_graph();
        let cfg = SimulationConfig { num_nanodevices: 6, sim_time: 400.0, ..Default::default() };
        let d = simulate(&g, &cfg, &fixtures::event_on(&g, 4, 0.3)).unwrap();
        let mut last: BTreeMap<u32, f64> = BTreeMap::new();
        for r in &d.records {
            if let Some(prev) = last.insert(r.nanodevice_id, r.timestamp) {
                assert!(r.timestamp > prev);
            }
            assert!(r.circulation_time > 0.0);
            let s = r.raw_positions.as_ref().unwrap();
            assert!(s.windows(2).all(|w| w[1].t > w[0].t));
            assert!((s.last().unwrap().t - s[0].t - r.circulation_time).abs() < 1e-9);
        }
    }

    #[test]
    fn visit_probability_errors_and_mandatory_regions() {
        let g = fixtures::fork_graph();
        assert!(estimate_visit_probabilities(&g, 0, 1).is_err());
        let v = estimate_visit_probabilities(&g, 500, 1).unwrap();
        assert_eq!(v.get(1), Some(1.0));
        assert_eq!(v.get(3), Some(1.0));
        assert_eq!(v.get(6), Some(1.0));
        let a = v.get(4).unwrap();
        assert!((a + v.get(5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plan_counts_and_distinct_locations() {
        let g = fixtures::fork_graph();
        let jobs = benchmark_plan(&g, &SimulationConfig::default(), 3).unwrap();
        assert_eq!(jobs.len(), 2 * 3);
        assert_ne!(jobs[0].event.location, jobs[1].event.location);
        assert_ne!(jobs[0].config.seed, jobs[1].config.seed);
        assert!(benchmark_plan(&g, &SimulationConfig::default(), 0).is_err());
    }
}
