//! Region accuracy, point error, confusion matrices and box-plot summaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{GraphDesign, InputGraph};
use crate::geometry::{self, Point3};
use crate::gnn::{predict_index, ModelParams};
use crate::math;
use crate::mobility_sim::DatasetKey;
use crate::vasculature::VascularGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub dataset: DatasetKey,
    pub profile: String,
    pub design: GraphDesign,
    pub predicted_region: u32,
    pub truth_region: u32,
    pub truth_location: Point3,
}

impl Prediction {
    pub fn is_correct(&self) -> bool {
        self.predicted_region == self.truth_region
    }
}

/// Region id with the highest output among the event regions of `g`.
pub fn predict(m: &ModelParams, g: &InputGraph) -> Result<u32> {
    Ok(g.region_ids[predict_index(m, g)?])
}

/// Where a predicted region is placed when measuring point error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    /// Centroid of the region polyline.
    #[default]
    Centroid,
    /// Point of the region polyline nearest to the true location.
    NearestOnPath,
}

pub fn region_accuracy(preds: &[Prediction]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("no predictions"));
    }
    Ok(preds.iter().filter(|p| p.is_correct()).count() as f64 / preds.len() as f64)
}

/// Distance from the predicted region's centroid to `truth_location`.
pub fn point_error(graph: &VascularGraph, predicted_region: u32, truth_location: &Point3) -> Result<f64> {
    point_error_with(graph, predicted_region, truth_location, PointEstimate::Centroid)
}

pub fn point_error_with(
    graph: &VascularGraph,
    predicted_region: u32,
    truth_location: &Point3,
    estimate: PointEstimate,
) -> Result<f64> {
    let node = graph.node(predicted_region).map_err(|_| Error::UnknownRegion(predicted_region))?;
    Ok(match estimate {
        PointEstimate::Centroid => geometry::centroid(&node.path).distance(truth_location),
        PointEstimate::NearestOnPath => geometry::distance_to_path(&node.path, truth_location),
    })
}

/// Rows are truth regions, columns predicted regions, both in `labels` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts.iter().enumerate().all(|(i, r)| r.iter().enumerate().all(|(j, &c)| i == j || c == 0))
    }
}

pub fn confusion_matrix(preds: &[Prediction], labels: &[u32]) -> Result<ConfusionMatrix> {
    let pos = |id: u32| labels.iter().position(|&l| l == id).ok_or(Error::UnknownRegion(id));
    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    for p in preds {
        counts[pos(p.truth_region)?][pos(p.predicted_region)?] += 1;
    }
    Ok(ConfusionMatrix { labels: labels.to_vec(), counts })
}

/// Five-number summary using linear-interpolation quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    math::sort_f64(&mut v);
    Some(BoxStats {
        n: v.len(),
        min: v[0],
        q1: math::quantile_sorted(&v, 0.25),
        median: math::quantile_sorted(&v, 0.5),
        q3: math::quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointErrorSample {
    pub truth_region: u32,
    pub error: f64,
}

/// Metrics of one (design, profile) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub design: GraphDesign,
    pub profile: String,
    pub point_estimate: PointEstimate,
    pub predictions: usize,
    pub region_accuracy: f64,
    pub point_errors: Vec<PointErrorSample>,
    /// Box statistics of point error grouped by truth region.
    pub per_region: BTreeMap<u32, BoxStats>,
    pub overall: BoxStats,
    pub confusion: ConfusionMatrix,
}

/// Scores predictions against `graph`, which must be the vasculature scaled to
/// the predictions' profile. All predictions must share design and profile.
pub fn metrics_report(graph: &VascularGraph, preds: &[Prediction], estimate: PointEstimate) -> Result<MetricsReport> {
    let first = preds.first().ok_or(Error::Empty("no predictions"))?;
    if preds.iter().any(|p| p.design != first.design || p.profile != first.profile) {
        return Err(Error::InputGraph("predictions from several designs or profiles in one report".into()));
    }
    let mut point_errors = Vec::with_capacity(preds.len());
    let mut grouped: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for p in preds {
        let error = point_error_with(graph, p.predicted_region, &p.truth_location, estimate)?;
        point_errors.push(PointErrorSample { truth_region: p.truth_region, error });
        grouped.entry(p.truth_region).or_default().push(error);
    }
    let all: Vec<f64> = point_errors.iter().map(|s| s.error).collect();
    Ok(MetricsReport {
        design: first.design,
        profile: first.profile.clone(),
        point_estimate: estimate,
        predictions: preds.len(),
        region_accuracy: region_accuracy(preds)?,
        per_region: grouped.iter().filter_map(|(&r, v)| Some((r, box_stats(v)?))).collect(),
        overall: box_stats(&all).expect("non-empty"),
        point_errors,
        confusion: confusion_matrix(preds, graph.event_region_ids())?,
    })
}

/// One profile's row of a design-versus-baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub profile: String,
    pub baseline_accuracy: f64,
    pub design_accuracy: f64,
    pub baseline_median_error: f64,
    pub design_median_error: f64,
}

impl ComparisonRow {
    pub fn design_at_least_baseline(&self) -> bool {
        self.design_accuracy >= self.baseline_accuracy
    }
}

/// Pairs up reports of `baseline` and `design` by profile, in the order the
/// baseline reports appear. Profiles missing either side are skipped.
pub fn compare(reports: &[MetricsReport], baseline: GraphDesign, design: GraphDesign) -> Vec<ComparisonRow> {
    reports
        .iter()
        .filter(|r| r.design == baseline)
        .filter_map(|b| {
            let d = reports.iter().find(|r| r.design == design && r.profile == b.profile)?;
            Some(ComparisonRow {
                profile: b.profile.clone(),
                baseline_accuracy: b.region_accuracy,
                design_accuracy: d.region_accuracy,
                baseline_median_error: b.overall.median,
                design_median_error: d.overall.median,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn pred(truth: u32, predicted: u32) -> Prediction {
        Prediction {
            dataset: DatasetKey { region_id: truth, event_index: 0 },
            profile: "original".into(),
            design: GraphDesign::C,
            predicted_region: predicted,
            truth_region: truth,
            truth_location: Point3::ORIGIN,
        }
    }

    #[test]
    fn accuracy_counts() {
        let mut preds: Vec<Prediction> = (0..45).map(|i| pred(4, if i < 9 { 4 } else { 5 })).collect();
        assert_eq!(region_accuracy(&preds).unwrap(), 0.2);
        preds.clear();
        assert!(region_accuracy(&preds).is_err());
    }

    #[test]
    fn confusion_trace_matches_accuracy() {
        let preds = [pred(4, 4), pred(4, 5), pred(5, 5), pred(5, 5)];
        let c = confusion_matrix(&preds, &[4, 5]).unwrap();
        assert_eq!(c.counts, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(c.trace() as f64 / c.total() as f64, region_accuracy(&preds).unwrap());
        assert!(confusion_matrix(&[pred(9, 4)], &[4, 5]).is_err());
    }

    #[test]
    fn point_error_at_centroid_is_zero() {
        let g = fixtures::fork_graph();
        let c = g.region_centroid(4).unwrap();
        assert_eq!(point_error(&g, 4, &c).unwrap(), 0.0);
        assert!(matches!(point_error(&g, 99, &c), Err(Error::UnknownRegion(99))));
        let on_path = g.node(4).unwrap().path[0];
        assert_eq!(point_error_with(&g, 4, &on_path, PointEstimate::NearestOnPath).unwrap(), 0.0);
    }

    #[test]
    fn box_stats_interpolate() {
        let b = box_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert!(box_stats(&[]).is_none());
    }
}
