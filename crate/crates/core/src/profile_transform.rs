//! Rescaling of reference-bloodstream data to an individual patient.
//!
//! Height stretches the vertical (`y`) axis. Weight is modeled by treating the
//! body as a uniform-density cylinder: volume grows with weight, the height
//! ratio is known, so the horizontal (`x`, `z`) radius scales by
//! `k = sqrt(weight_ratio / height_ratio)`.
//!
//! Circulation times are rebuilt from the per-report position traces. For each
//! pair of consecutive samples the original time step is rescaled:
//!
//! * both samples in the same region: by that region's scaled/original length
//!   ratio;
//! * samples in different regions: the device is assumed to keep the speed
//!   `original distance / original step`, so the step becomes
//!   `scaled distance / speed`. This ignores the speed change at the region
//!   boundary; most steps fall in the first case.
//!
//! Every step is finally divided by the activity level (`blood_speed_scale`)
//! and the steps are re-accumulated into circulation times and timestamps.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::math;
use crate::mobility_sim::{RawDataset, ReportRecord, Sample};
use crate::vasculature::VascularGraph;

/// Version of the serialized [`ProfileSet`] layout.
pub const PROFILE_SCHEMA_VERSION: u32 = 1;

/// Heart rate (beats/min) of the reference, resting patient.
pub const RESTING_HEART_RATE: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub height_ratio: f64,
    pub weight_ratio: f64,
    /// Activity level; multiplies every blood speed.
    pub blood_speed_scale: f64,
    /// beats/min
    pub heart_rate: f64,
}

impl Profile {
    pub fn original() -> Self {
        Self::new("original", 1.0, 1.0, 1.0)
    }

    /// Profile whose heart rate follows the activity level linearly.
    pub fn new(name: &str, height_ratio: f64, weight_ratio: f64, blood_speed_scale: f64) -> Self {
        Self {
            name: name.to_string(),
            height_ratio,
            weight_ratio,
            blood_speed_scale,
            heart_rate: RESTING_HEART_RATE * blood_speed_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        for (field, v) in [
            ("height_ratio", self.height_ratio),
            ("weight_ratio", self.weight_ratio),
            ("blood_speed_scale", self.blood_speed_scale),
            ("heart_rate", self.heart_rate),
        ] {
            if !positive(v) {
                return Err(Error::Profile { name: self.name.clone(), reason: format!("{field} must be positive, got {v}") });
            }
        }
        Ok(())
    }

    pub fn radius_scale(&self) -> Result<f64> {
        radius_scale(self.weight_ratio, self.height_ratio)
    }
}

/// Maps a heart rate to an activity level relative to [`RESTING_HEART_RATE`].
pub fn blood_speed_scale_from_heart_rate(heart_rate: f64) -> f64 {
    heart_rate / RESTING_HEART_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub schema_version: u32,
    pub profiles: Vec<Profile>,
}

impl Default for ProfileSet {
    /// The nine reference profiles. Ratios are fixture values.
    fn default() -> Self {
        Self {
            schema_version: PROFILE_SCHEMA_VERSION,
            profiles: alloc::vec![
                Profile::original(),
                Profile::new("tall", 1.15, 1.0, 1.0),
                Profile::new("short", 0.87, 1.0, 1.0),
                Profile::new("heavy", 1.0, 1.3, 1.0),
                Profile::new("light", 1.0, 0.77, 1.0),
                Profile::new("active", 1.0, 1.0, 1.5),
                Profile::new("inactive", 1.0, 1.0, 0.67),
                Profile::new("big", 1.15, 1.3, 1.0),
                Profile::new("small", 0.87, 0.77, 1.0),
            ],
        }
    }
}

impl ProfileSet {
    pub const NAMES: [&'static str; 9] = ["original", "tall", "short", "heavy", "light", "active", "inactive", "big", "small"];

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(Error::Profile { name: String::new(), reason: format!("unsupported schema_version {}", self.schema_version) });
        }
        let mut seen = BTreeMap::new();
        for p in &self.profiles {
            p.validate()?;
            if seen.insert(p.name.as_str(), ()).is_some() {
                return Err(Error::Profile { name: p.name.clone(), reason: "duplicate profile name".into() });
            }
        }
        for name in Self::NAMES {
            if !seen.contains_key(name) {
                return Err(Error::Profile { name: name.into(), reason: "missing from profile set".into() });
            }
        }
        let o = self.get("original")?;
        if o.height_ratio != 1.0 || o.weight_ratio != 1.0 || o.blood_speed_scale != 1.0 {
            return Err(Error::Profile { name: o.name.clone(), reason: "original profile must have all ratios = 1".into() });
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Profile> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Profile { name: name.into(), reason: "unknown profile".into() })
    }
}

/// Horizontal scaling `k = sqrt(weight_ratio / height_ratio)` of the cylinder body model.
pub fn radius_scale(weight_ratio: f64, height_ratio: f64) -> Result<f64> {
    if !(weight_ratio.is_finite() && weight_ratio > 0.0 && height_ratio.is_finite() && height_ratio > 0.0) {
        return Err(Error::Profile {
            name: String::new(),
            reason: format!("ratios must be positive (weight {weight_ratio}, height {height_ratio})"),
        });
    }
    Ok(math::sqrt(weight_ratio / height_ratio))
}

pub fn scale_point(p: &Point3, profile: &Profile) -> Result<Point3> {
    profile.validate()?;
    let k = profile.radius_scale()?;
    Ok(scale_with(p, k, profile.height_ratio))
}

#[inline]
fn scale_with(p: &Point3, k: f64, h: f64) -> Point3 {
    Point3::new(p.x * k, p.y * h, p.z * k)
}

/// Vasculature with every vertex passed through [`scale_point`].
pub fn scale_graph(graph: &VascularGraph, profile: &Profile) -> Result<VascularGraph> {
    profile.validate()?;
    let k = profile.radius_scale()?;
    let h = profile.height_ratio;
    Ok(graph.map_paths(|n| n.path.iter().map(|p| scale_with(p, k, h)).collect()))
}

/// Rescales a simulated dataset to `profile`. Requires retained position traces.
pub fn transform_dataset(raw: &RawDataset, graph: &VascularGraph, profile: &Profile) -> Result<RawDataset> {
    profile.validate()?;
    if !raw.has_positions() {
        return Err(Error::Transform("dataset was simulated without raw_positions".into()));
    }
    let k = profile.radius_scale()?;
    let h = profile.height_ratio;
    let speed_scale = profile.blood_speed_scale;
    let scaled = scale_graph(graph, profile)?;
    let ratio: BTreeMap<u32, f64> = graph
        .nodes()
        .iter()
        .zip(scaled.nodes())
        .map(|(o, s)| (o.id, s.length / o.length))
        .collect();
    let length_ratio = |id: u32| ratio.get(&id).copied().ok_or(Error::UnknownRegion(id));

    // Records grouped per nanodevice, keeping time order.
    let mut per_device: BTreeMap<u32, Vec<&ReportRecord>> = BTreeMap::new();
    for r in &raw.records {
        per_device.entry(r.nanodevice_id).or_default().push(r);
    }

    let mut records = Vec::with_capacity(raw.records.len());
    for (nd, mut recs) in per_device {
        recs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let mut cursor: Option<f64> = None;
        for r in recs {
            let samples = r.raw_positions.as_deref().expect("checked above");
            if samples.is_empty() {
                return Err(Error::Transform(format!("nanodevice {nd}: empty position trace")));
            }
            let start = *cursor.get_or_insert(samples[0].t);
            let (mut t, mut circ) = (start, 0.0);
            let mut out = Vec::with_capacity(samples.len());
            out.push(Sample { t, position: scale_with(&samples[0].position, k, h), region: samples[0].region });
            for w in samples.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let dt = b.t - a.t;
                if !(dt > 0.0) {
                    return Err(Error::Transform(format!("nanodevice {nd}: zero or negative time step at t = {}", a.t)));
                }
                let factor = if a.region == b.region {
                    length_ratio(a.region)?
                } else {
                    let d = a.position.distance(&b.position);
                    if d > 0.0 {
                        let d_scaled = scale_with(&a.position, k, h).distance(&scale_with(&b.position, k, h));
                        d_scaled / d
                    } else {
                        // Coincident boundary samples carry no direction; average the two regions.
                        0.5 * (length_ratio(a.region)? + length_ratio(b.region)?)
                    }
                };
                circ += dt * factor / speed_scale;
                t = start + circ;
                out.push(Sample { t, position: scale_with(&b.position, k, h), region: b.region });
            }
            cursor = Some(t);
            records.push(ReportRecord {
                nanodevice_id: nd,
                event_bit: r.event_bit,
                circulation_time: circ,
                timestamp: t,
                raw_positions: Some(out),
            });
        }
    }
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.nanodevice_id.cmp(&b.nanodevice_id)));

    let mut event = raw.event;
    event.location = scale_with(&event.location, k, h);
    Ok(RawDataset { key: raw.key, profile: profile.name.clone(), event, config: raw.config.clone(), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mobility_sim::{simulate, SimulationConfig};

    #[test]
    fn radius_scale_examples() {
        assert_eq!(radius_scale(1.0, 1.0).unwrap(), 1.0);
        assert!((radius_scale(1.44, 1.0).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(radius_scale(2.0, 2.0).unwrap(), 1.0);
        assert!(radius_scale(0.0, 1.0).is_err());
        assert!(radius_scale(1.0, -1.0).is_err());
    }

    #[test]
    fn scale_point_examples() {
        let id = Profile::original();
        let p = Point3::new(1.5, -2.0, 7.25);
        assert_eq!(scale_point(&p, &id).unwrap(), p);
        let tall = Profile::new("t", 1.2, 1.0, 1.0);
        let q = scale_point(&Point3::new(0.0, 10.0, 0.0), &tall).unwrap();
        assert!((q.y - 12.0).abs() < 1e-12 && q.x == 0.0 && q.z == 0.0);
        let heavy = Profile::new("h", 1.0, 1.44, 1.0);
        let q = scale_point(&Point3::new(3.0, 0.0, 4.0), &heavy).unwrap();
        assert!((q.x - 3.6).abs() < 1e-12 && (q.z - 4.8).abs() < 1e-12 && q.y == 0.0);
    }

    #[test]
    fn default_profile_set_is_valid() {
        let set = ProfileSet::default();
        set.validate().unwrap();
        assert_eq!(set.profiles.len(), 9);
        assert!(set.get("nobody").is_err());
        let mut broken = set.clone();
        broken.profiles[0].height_ratio = 1.1;
        assert!(broken.validate().is_err());
    }

    #[test]
    fn requires_positions() {
        let g = fixtures::fork_graph();
        let cfg = SimulationConfig { num_nanodevices: 2, sim_time: 100.0, retain_positions: false, ..Default::default() };
        let d = simulate(&g, &cfg, &fixtures::event_on(&g, 4, 0.5)).unwrap();
        assert!(matches!(transform_dataset(&d, &g, &Profile::original()), Err(Error::Transform(_))));
    }

    #[test]
    fn zero_time_step_is_an_error() {
        let g = fixtures::fork_graph();
        let cfg = SimulationConfig { num_nanodevices: 1, sim_time: 100.0, report_success_prob: 1.0, ..Default::default() };
        let mut d = simulate(&g, &cfg, &fixtures::event_on(&g, 4, 0.5)).unwrap();
        let s = d.records[0].raw_positions.as_mut().unwrap();
        s[2].t = s[1].t;
        assert!(matches!(transform_dataset(&d, &g, &Profile::original()), Err(Error::Transform(_))));
    }
}
