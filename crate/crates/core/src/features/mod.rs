//! Anchor descriptors and heterogeneous input graphs.
//!
//! The anchor receives a variable number of reports, so its data is reduced to
//! a fixed-length descriptor: a two-component Gaussian mixture over the
//! circulation times of positive-bit reports plus the mean number of positive
//! reports per nanodevice.

mod gmm;
mod graph;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use gmm::{fit_gmm, fit_gmm_traced, EmSettings, GaussianComponent, GmmFit, GmmParams};
pub use graph::{
    build_input_graph, BuildOptions, EdgeSet, EdgeType, FeatureStats, GraphDesign, GraphSchema, InputGraph, NodeType,
    Standardization, REGION_FEATURE_DIM,
};

use crate::mobility_sim::RawDataset;

/// Length of [`AnchorFeatures::to_array`].
pub const ANCHOR_FEATURE_DIM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorFeatures {
    pub gmm: GmmParams,
    pub avg_positive_bits: f64,
}

impl AnchorFeatures {
    /// `[mean₁, var₁, weight₁, mean₂, var₂, weight₂, avg_positive_bits]`.
    pub fn to_array(&self) -> [f64; ANCHOR_FEATURE_DIM] {
        let g = self.gmm.to_array();
        [g[0], g[1], g[2], g[3], g[4], g[5], self.avg_positive_bits]
    }
}

/// Descriptor of one dataset. With no positive reports the mixture block is
/// the all-zero sentinel.
pub fn anchor_features(raw: &RawDataset) -> AnchorFeatures {
    anchor_features_with(raw, &EmSettings::default())
}

pub fn anchor_features_with(raw: &RawDataset, settings: &EmSettings) -> AnchorFeatures {
    let times: Vec<f64> = raw.positive_records().map(|r| r.circulation_time).collect();
    if times.is_empty() {
        return AnchorFeatures { gmm: GmmParams::SENTINEL, avg_positive_bits: 0.0 };
    }
    let gmm = fit_gmm(&times, settings).expect("non-empty input");
    let avg_positive_bits = times.len() as f64 / f64::from(raw.config.num_nanodevices);
    AnchorFeatures { gmm, avg_positive_bits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mobility_sim::{simulate, DatasetKey, EventSpec, ReportRecord, SimulationConfig};
    use crate::Point3;
    use alloc::string::String;
    use alloc::vec;

    fn dataset(records: Vec<ReportRecord>) -> RawDataset {
        RawDataset {
            key: DatasetKey { region_id: 3, event_index: 0 },
            profile: String::from("original"),
            event: EventSpec { region_id: 3, location: Point3::ORIGIN },
            config: SimulationConfig::default(),
            records,
        }
    }

    fn rec(nd: u32, bit: bool, ct: f64) -> ReportRecord {
        ReportRecord { nanodevice_id: nd, event_bit: bit, circulation_time: ct, timestamp: ct, raw_positions: None }
    }

    #[test]
    fn no_positives_gives_sentinel() {
        let f = anchor_features(&dataset(vec![rec(0, false, 10.0), rec(1, false, 12.0)]));
        assert_eq!(f.to_array(), [0.0; 7]);
        assert_eq!(anchor_features(&dataset(vec![])).to_array(), [0.0; 7]);
    }

    #[test]
    fn average_positive_bits() {
        let records = (0..128).map(|i| rec(i % 64, true, 10.0 + (i % 7) as f64)).collect();
        let f = anchor_features(&dataset(records));
        assert_eq!(f.avg_positive_bits, 2.0);
        assert_eq!(f.to_array().len(), ANCHOR_FEATURE_DIM);
    }

    #[test]
    fn deterministic_loop_collapses_mixture() {
        let g = fixtures::single_cycle(2.0);
        let cfg = SimulationConfig { num_nanodevices: 3, sim_time: 200.0, report_success_prob: 1.0, ..Default::default() };
        let d = simulate(&g, &cfg, &fixtures::event_on(&g, 3, 0.5)).unwrap();
        let f = anchor_features(&d);
        let first = d.records[0].circulation_time;
        for c in f.gmm.components {
            assert!((c.mean - first).abs() < 1e-9);
        }
    }
}
