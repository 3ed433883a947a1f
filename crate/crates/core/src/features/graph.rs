use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnchorFeatures, ANCHOR_FEATURE_DIM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mobility_sim::VisitProbabilities;
use crate::profile_transform::Profile;
use crate::rng;
use crate::vasculature::{RegionKind, VascularGraph};

/// Kind one-hot (6) + length + blood speed.
pub const REGION_FEATURE_DIM: usize = RegionKind::ALL.len() + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphDesign {
    /// Regions and anchor only.
    Baseline,
    /// Master node with patient features and their inverses.
    A,
    /// Master node (plain features) plus heart-to-region probability edges.
    B,
    /// Master node with inverses plus probability edges.
    C,
}

impl GraphDesign {
    pub const ALL: [GraphDesign; 4] = [GraphDesign::Baseline, GraphDesign::A, GraphDesign::B, GraphDesign::C];

    pub fn has_master(self) -> bool {
        self != GraphDesign::Baseline
    }

    pub fn inverted_master(self) -> bool {
        matches!(self, GraphDesign::A | GraphDesign::C)
    }

    pub fn has_probability_edges(self) -> bool {
        matches!(self, GraphDesign::B | GraphDesign::C)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphDesign::Baseline => "baseline",
            GraphDesign::A => "a",
            GraphDesign::B => "b",
            GraphDesign::C => "c",
        }
    }
}

impl fmt::Display for GraphDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(GraphDesign::Baseline),
            "a" => Ok(GraphDesign::A),
            "b" => Ok(GraphDesign::B),
            "c" => Ok(GraphDesign::C),
            other => Err(Error::InputGraph(format!("unknown graph design `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Region,
    Anchor,
    Master,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    /// Anatomical adjacency, both directions.
    Adjacency,
    /// Heart to region, weighted by visit probability.
    Probability,
    AnchorToRegion,
    MasterToRegion,
    MasterToAnchor,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] =
        [EdgeType::Adjacency, EdgeType::Probability, EdgeType::AnchorToRegion, EdgeType::MasterToRegion, EdgeType::MasterToAnchor];

    pub fn source(self) -> NodeType {
        match self {
            EdgeType::Adjacency | EdgeType::Probability => NodeType::Region,
            EdgeType::AnchorToRegion => NodeType::Anchor,
            EdgeType::MasterToRegion | EdgeType::MasterToAnchor => NodeType::Master,
        }
    }

    pub fn target(self) -> NodeType {
        match self {
            EdgeType::MasterToAnchor => NodeType::Anchor,
            _ => NodeType::Region,
        }
    }

    /// Region-to-region edges, used by the homogeneous convolution layers.
    pub fn is_region_region(self) -> bool {
        matches!(self, EdgeType::Adjacency | EdgeType::Probability)
    }
}

/// Edges of one type, as parallel `src`/`dst`/`weight` arrays of node indices
/// within their node type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub kind: EdgeType,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub weight: Vec<f64>,
}

impl EdgeSet {
    fn new(kind: EdgeType) -> Self {
        Self { kind, src: Vec::new(), dst: Vec::new(), weight: Vec::new() }
    }

    fn push(&mut self, src: usize, dst: usize, weight: f64) {
        self.src.push(src);
        self.dst.push(dst);
        self.weight.push(weight);
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// What a model needs to know about the graphs it will see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSchema {
    pub region_dim: usize,
    pub anchor_dim: usize,
    pub master_dim: Option<usize>,
    pub edge_types: Vec<EdgeType>,
}

impl GraphSchema {
    /// Stable 64-bit fingerprint of the schema.
    pub fn fingerprint(&self) -> u64 {
        let mut parts = vec![self.region_dim as u64, self.anchor_dim as u64, self.master_dim.map_or(u64::MAX, |d| d as u64)];
        parts.extend(self.edge_types.iter().map(|e| *e as u64 + 1000));
        rng::derive_seed(0x5c4e_a11a, &parts)
    }
}

/// Per-column mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    fn fit<'a>(mats: impl Iterator<Item = &'a Matrix>, cols: usize) -> Self {
        let mut sum = vec![0.0; cols];
        let mut sq = vec![0.0; cols];
        let mut n = 0usize;
        let mats: Vec<&Matrix> = mats.collect();
        for m in &mats {
            for r in 0..m.rows {
                for (c, v) in m.row(r).iter().enumerate() {
                    sum[c] += v;
                }
                n += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| if n > 0 { s / n as f64 } else { 0.0 }).collect();
        for m in &mats {
            for r in 0..m.rows {
                for (c, v) in m.row(r).iter().enumerate() {
                    sq[c] += (v - mean[c]) * (v - mean[c]);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = if n > 0 { crate::math::sqrt(s / n as f64) } else { 0.0 };
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Self { mean, std }
    }

    fn apply(&self, m: &mut Matrix) -> Result<()> {
        if m.cols != self.mean.len() {
            return Err(Error::Schema(format!("feature width {} but statistics cover {}", m.cols, self.mean.len())));
        }
        for r in 0..m.rows {
            for (c, v) in m.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        Ok(())
    }
}

/// Z-score statistics fitted on a training set and reused at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub region: FeatureStats,
    pub anchor: FeatureStats,
    pub master: Option<FeatureStats>,
}

impl Standardization {
    pub fn fit(graphs: &[InputGraph]) -> Result<Self> {
        let first = graphs.first().ok_or(Error::Empty("no graphs to fit standardization on"))?;
        let schema = first.schema();
        if graphs.iter().any(|g| g.schema() != schema) {
            return Err(Error::Schema("graphs with different schemas".into()));
        }
        Ok(Self {
            region: FeatureStats::fit(graphs.iter().map(|g| &g.region_features), schema.region_dim),
            anchor: FeatureStats::fit(graphs.iter().map(|g| &g.anchor_features), schema.anchor_dim),
            master: schema
                .master_dim
                .map(|d| FeatureStats::fit(graphs.iter().filter_map(|g| g.master_features.as_ref()), d)),
        })
    }

    /// Standardizes `g` in place. Applying twice is an error.
    pub fn apply(&self, g: &mut InputGraph) -> Result<()> {
        if g.standardized {
            return Err(Error::InputGraph("graph is already standardized".into()));
        }
        self.region.apply(&mut g.region_features)?;
        self.anchor.apply(&mut g.anchor_features)?;
        match (&self.master, &mut g.master_features) {
            (Some(s), Some(m)) => s.apply(m)?,
            (None, None) => {}
            _ => return Err(Error::Schema("master node presence differs from standardization".into())),
        }
        g.standardized = true;
        Ok(())
    }
}

/// Heterogeneous model input for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGraph {
    pub design: GraphDesign,
    /// Region node order (vasculature ids).
    pub region_ids: Vec<u32>,
    /// Indices into `region_ids` of regions that can host events.
    pub event_regions: Vec<usize>,
    /// One row per region node.
    pub region_features: Matrix,
    /// 1 x [`ANCHOR_FEATURE_DIM`].
    pub anchor_features: Matrix,
    /// 1 x 3, or 1 x 6 when inverted features are included.
    pub master_features: Option<Matrix>,
    pub edges: Vec<EdgeSet>,
    /// Ground-truth event region id (training and evaluation only).
    pub truth_region: Option<u32>,
    pub standardized: bool,
}

impl InputGraph {
    pub fn num_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn schema(&self) -> GraphSchema {
        GraphSchema {
            region_dim: self.region_features.cols,
            anchor_dim: self.anchor_features.cols,
            master_dim: self.master_features.as_ref().map(|m| m.cols),
            edge_types: self.edges.iter().map(|e| e.kind).collect(),
        }
    }

    pub fn edges_of(&self, kind: EdgeType) -> Option<&EdgeSet> {
        self.edges.iter().find(|e| e.kind == kind)
    }

    pub fn region_index(&self, id: u32) -> Option<usize> {
        self.region_ids.iter().position(|&r| r == id)
    }

    /// One-hot target over region nodes, `None` without a label.
    pub fn target(&self) -> Option<Vec<f64>> {
        let idx = self.region_index(self.truth_region?)?;
        let mut t = vec![0.0; self.num_regions()];
        t[idx] = 1.0;
        Some(t)
    }

    /// Checks index ranges, weights and feature widths.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_regions();
        if self.region_features.rows != n {
            return Err(Error::InputGraph(format!("{} region feature rows for {} regions", self.region_features.rows, n)));
        }
        if self.anchor_features.rows != 1 || self.master_features.as_ref().is_some_and(|m| m.rows != 1) {
            return Err(Error::InputGraph("anchor and master carry exactly one feature row".into()));
        }
        if self.event_regions.iter().any(|&i| i >= n) || self.event_regions.is_empty() {
            return Err(Error::InputGraph("event region index out of range".into()));
        }
        let count = |t: NodeType| match t {
            NodeType::Region => n,
            NodeType::Anchor => 1,
            NodeType::Master => usize::from(self.master_features.is_some()),
        };
        for (i, e) in self.edges.iter().enumerate() {
            if self.edges[..i].iter().any(|o| o.kind == e.kind) {
                return Err(Error::InputGraph(format!("duplicate edge set {:?}", e.kind)));
            }
            if e.src.len() != e.dst.len() || e.src.len() != e.weight.len() {
                return Err(Error::InputGraph(format!("{:?}: ragged edge arrays", e.kind)));
            }
            let (ns, nd) = (count(e.kind.source()), count(e.kind.target()));
            if e.src.iter().any(|&s| s >= ns) || e.dst.iter().any(|&d| d >= nd) {
                return Err(Error::InputGraph(format!("{:?}: node index out of range", e.kind)));
            }
            if e.weight.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InputGraph(format!("{:?}: weights must be finite and non-negative", e.kind)));
            }
        }
        if !(self.region_features.is_finite() && self.anchor_features.is_finite()) {
            return Err(Error::InputGraph("non-finite node feature".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Also add region-to-heart copies of every probability edge.
    pub undirected_probability_edges: bool,
}

/// Assembles the input graph for one dataset.
///
/// Probability edges need `probs` (designs b and c); a missing map is an error.
/// Features are raw; see [`Standardization`].
pub fn build_input_graph(
    graph: &VascularGraph,
    feats: &AnchorFeatures,
    profile: &Profile,
    design: GraphDesign,
    probs: Option<&VisitProbabilities>,
    opts: BuildOptions,
) -> Result<InputGraph> {
    profile.validate()?;
    let nodes = graph.nodes();
    let n = nodes.len();
    let region_ids: Vec<u32> = nodes.iter().map(|r| r.id).collect();

    let mut region_features = Matrix::zeros(n, REGION_FEATURE_DIM);
    for (i, r) in nodes.iter().enumerate() {
        let row = region_features.row_mut(i);
        row[r.kind.index()] = 1.0;
        row[RegionKind::ALL.len()] = r.length;
        row[RegionKind::ALL.len() + 1] = r.blood_speed;
    }
    let anchor_features = Matrix::from_vec(1, ANCHOR_FEATURE_DIM, feats.to_array().to_vec());

    let master_features = design.has_master().then(|| {
        let (w, h, hr) = (profile.weight_ratio, profile.height_ratio, profile.heart_rate);
        let mut v = vec![w, h, hr];
        if design.inverted_master() {
            v.extend([1.0 / w, 1.0 / h, 1.0 / hr]);
        }
        Matrix::from_vec(1, v.len(), v)
    });

    let mut edges = Vec::new();
    let mut adj = EdgeSet::new(EdgeType::Adjacency);
    for e in graph.edges() {
        let (a, b) = (graph.index_of(e.from)?, graph.index_of(e.to)?);
        adj.push(a, b, 1.0);
        adj.push(b, a, 1.0);
    }
    edges.push(adj);

    if design.has_probability_edges() {
        let probs = probs.ok_or_else(|| Error::InputGraph(format!("design {design} needs visit probabilities")))?;
        let hearts = graph.heart_ids();
        let mut pe = EdgeSet::new(EdgeType::Probability);
        for h in hearts {
            let hi = graph.index_of(h)?;
            for (ri, r) in nodes.iter().enumerate() {
                if hearts.contains(&r.id) {
                    continue;
                }
                let p = probs.get(r.id).ok_or_else(|| Error::InputGraph(format!("no visit probability for region {}", r.id)))?;
                pe.push(hi, ri, p);
                if opts.undirected_probability_edges {
                    pe.push(ri, hi, p);
                }
            }
        }
        edges.push(pe);
    }

    let mut a2r = EdgeSet::new(EdgeType::AnchorToRegion);
    for i in 0..n {
        a2r.push(0, i, 1.0);
    }
    edges.push(a2r);

    if design.has_master() {
        let mut m2r = EdgeSet::new(EdgeType::MasterToRegion);
        for i in 0..n {
            m2r.push(0, i, 1.0);
        }
        edges.push(m2r);
        let mut m2a = EdgeSet::new(EdgeType::MasterToAnchor);
        m2a.push(0, 0, 1.0);
        edges.push(m2a);
    }

    let event_regions =
        graph.event_region_ids().iter().map(|&id| graph.index_of(id)).collect::<Result<Vec<_>>>()?;
    let g = InputGraph {
        design,
        region_ids,
        event_regions,
        region_features,
        anchor_features,
        master_features,
        edges,
        truth_region: None,
        standardized: false,
    };
    g.validate()?;
    Ok(g)
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeType::Region => "region",
            NodeType::Anchor => "anchor",
            NodeType::Master => "master",
        };
        f.write_str(s)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = match self {
            EdgeType::Adjacency => "adjacency".into(),
            EdgeType::Probability => "probability".into(),
            other => format!("{}_to_{}", other.source(), other.target()),
        };
        f.write_str(&s.to_string())
    }
}
