//! Cardiovascular graph: typed regions with polyline geometry, blood speed and
//! directed flow edges between them.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point3};

/// Version of [`VasculatureSchema`] written by this crate.
pub const VASCULATURE_SCHEMA_VERSION: u32 = 1;

/// Number of regions that can host a diagnostic event in the reference body.
pub const EVENT_REGION_COUNT: usize = 25;

const LENGTH_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Organ,
    Limb,
    Head,
    Vein,
    Artery,
    Heart,
}

impl RegionKind {
    pub const ALL: [RegionKind; 6] = [
        RegionKind::Organ,
        RegionKind::Limb,
        RegionKind::Head,
        RegionKind::Vein,
        RegionKind::Artery,
        RegionKind::Heart,
    ];

    /// Organs, limbs and the head can host events; vessels and hearts cannot.
    pub fn hosts_events(self) -> bool {
        matches!(self, RegionKind::Organ | RegionKind::Limb | RegionKind::Head)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNode {
    pub id: u32,
    pub name: String,
    pub kind: RegionKind,
    pub path: Vec<Point3>,
    /// Arc length of `path`, cm.
    pub length: f64,
    /// cm/s
    pub blood_speed: f64,
}

/// Directed flow edge. `weight` is the relative branch preference at `from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: u32,
    pub to: u32,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

/// On-disk layout of a vasculature description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VasculatureSchema {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `[left, right]`. When omitted the two `heart` nodes are taken in id order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hearts: Option<[u32; 2]>,
    /// Heart region the anchor sits next to. Defaults to the left heart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_heart: Option<u32>,
    pub nodes: Vec<NodeSchema>,
    pub edges: Vec<FlowEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSchema {
    pub id: u32,
    pub name: String,
    pub kind: RegionKind,
    pub blood_speed: f64,
    pub path: Vec<Point3>,
    /// Checked against the polyline arc length when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

/// Which structural checks [`VascularGraph::new`] applies beyond the
/// always-on ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Required number of event-hosting regions; `None` accepts any.
    pub event_regions: Option<usize>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { event_regions: Some(EVENT_REGION_COUNT) }
    }
}

impl ValidationOptions {
    pub fn any_size() -> Self {
        Self { event_regions: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VascularGraph {
    nodes: Vec<RegionNode>,
    edges: Vec<FlowEdge>,
    heart_ids: [u32; 2],
    anchor_heart: u32,
    event_region_ids: Vec<u32>,
    index: BTreeMap<u32, usize>,
    /// Per node index: downstream (node index, weight), ascending by id.
    downstream: Vec<Vec<(usize, f64)>>,
}

impl VascularGraph {
    /// Builds and validates a graph. Nodes are stored in ascending id order.
    pub fn new(
        mut nodes: Vec<RegionNode>,
        edges: Vec<FlowEdge>,
        hearts: Option<[u32; 2]>,
        anchor_heart: Option<u32>,
        opts: ValidationOptions,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Graph("no nodes".into()));
        }
        nodes.sort_by_key(|n| n.id);
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(node_err(n.id, "duplicate id"));
            }
            validate_node(n)?;
        }

        let mut downstream = vec![Vec::new(); nodes.len()];
        let mut upstream = vec![Vec::new(); nodes.len()];
        for e in &edges {
            let from = *index.get(&e.from).ok_or_else(|| node_err(e.from, "edge source does not exist"))?;
            let to = *index.get(&e.to).ok_or_else(|| node_err(e.to, "edge target does not exist"))?;
            if from == to {
                return Err(node_err(e.from, "self-loop edge"));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(node_err(e.from, "edge weight must be positive"));
            }
            if downstream[from].iter().any(|&(t, _)| t == to) {
                return Err(node_err(e.from, &format!("duplicate edge to {}", e.to)));
            }
            downstream[from].push((to, e.weight));
            upstream[to].push(from);
        }
        for d in &mut downstream {
            d.sort_by_key(|&(t, _)| t);
        }

        let heart_nodes: Vec<u32> = nodes.iter().filter(|n| n.kind == RegionKind::Heart).map(|n| n.id).collect();
        if heart_nodes.len() != 2 {
            return Err(Error::Graph(format!("expected exactly 2 heart nodes, found {}", heart_nodes.len())));
        }
        let heart_ids = match hearts {
            Some(h) => {
                if h[0] == h[1] || !heart_nodes.contains(&h[0]) || !heart_nodes.contains(&h[1]) {
                    return Err(Error::Graph(format!("hearts {:?} must name the two heart nodes", h)));
                }
                h
            }
            None => [heart_nodes[0], heart_nodes[1]],
        };
        let anchor_heart = anchor_heart.unwrap_or(heart_ids[0]);
        if !heart_ids.contains(&anchor_heart) {
            return Err(node_err(anchor_heart, "anchor must sit at a heart node"));
        }

        let event_region_ids: Vec<u32> = nodes.iter().filter(|n| n.kind.hosts_events()).map(|n| n.id).collect();
        if let Some(want) = opts.event_regions {
            if event_region_ids.len() != want {
                return Err(Error::Graph(format!(
                    "expected {} event regions, found {}",
                    want,
                    event_region_ids.len()
                )));
            }
        }

        let g = Self { nodes, edges, heart_ids, anchor_heart, event_region_ids, index, downstream };
        g.check_connected(&upstream)?;
        g.check_heart_cycles(&upstream)?;
        Ok(g)
    }

    pub fn from_schema(schema: VasculatureSchema, opts: ValidationOptions) -> Result<Self> {
        if schema.schema_version != VASCULATURE_SCHEMA_VERSION {
            return Err(Error::Graph(format!("unsupported schema_version {}", schema.schema_version)));
        }
        let mut nodes = Vec::with_capacity(schema.nodes.len());
        for n in schema.nodes {
            let arc = geometry::arc_length(&n.path);
            if let Some(declared) = n.length {
                if (declared - arc).abs() > LENGTH_REL_TOL * arc.max(declared.abs()) {
                    return Err(node_err(n.id, &format!("declared length {} differs from polyline length {}", declared, arc)));
                }
            }
            nodes.push(RegionNode { id: n.id, name: n.name, kind: n.kind, path: n.path, length: arc, blood_speed: n.blood_speed });
        }
        Self::new(nodes, schema.edges, schema.hearts, schema.anchor_heart, opts)
    }

    pub fn to_schema(&self) -> VasculatureSchema {
        VasculatureSchema {
            schema_version: VASCULATURE_SCHEMA_VERSION,
            name: None,
            hearts: Some(self.heart_ids),
            anchor_heart: Some(self.anchor_heart),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSchema {
                    id: n.id,
                    name: n.name.clone(),
                    kind: n.kind,
                    blood_speed: n.blood_speed,
                    path: n.path.clone(),
                    length: Some(n.length),
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }

    /// Same topology with every node's path replaced by `f(path)`; lengths are
    /// re-measured.
    pub fn map_paths(&self, mut f: impl FnMut(&RegionNode) -> Vec<Point3>) -> Self {
        let mut g = self.clone();
        for n in &mut g.nodes {
            let path = f(n);
            n.length = geometry::arc_length(&path);
            n.path = path;
        }
        g
    }

    pub fn nodes(&self) -> &[RegionNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    /// `[left, right]`.
    pub fn heart_ids(&self) -> [u32; 2] {
        self.heart_ids
    }

    pub fn anchor_heart(&self) -> u32 {
        self.anchor_heart
    }

    /// Event-hosting regions, ascending id.
    pub fn event_region_ids(&self) -> &[u32] {
        &self.event_region_ids
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: u32) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownRegion(id))
    }

    pub fn node(&self, id: u32) -> Result<&RegionNode> {
        Ok(&self.nodes[self.index_of(id)?])
    }

    /// Downstream `(node index, weight)` pairs of the node at `idx`.
    pub fn downstream_of_index(&self, idx: usize) -> &[(usize, f64)] {
        &self.downstream[idx]
    }

    /// Ids reachable in one hop along the flow direction, ascending.
    pub fn neighbors_downstream(&self, id: u32) -> Result<Vec<u32>> {
        let i = self.index_of(id)?;
        Ok(self.downstream[i].iter().map(|&(t, _)| self.nodes[t].id).collect())
    }

    /// Mean of the region's polyline vertices.
    pub fn region_centroid(&self, id: u32) -> Result<Point3> {
        Ok(geometry::centroid(&self.node(id)?.path))
    }

    fn check_connected(&self, upstream: &[Vec<usize>]) -> Result<()> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            let nexts = self.downstream[i].iter().map(|&(t, _)| t).chain(upstream[i].iter().copied());
            for j in nexts {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(node_err(self.nodes[i].id, "disconnected from the rest of the graph")),
            None => Ok(()),
        }
    }

    /// Every node must be reachable from some heart and lead back to that heart.
    fn check_heart_cycles(&self, upstream: &[Vec<usize>]) -> Result<()> {
        let n = self.nodes.len();
        let mut on_cycle = vec![false; n];
        for h in self.heart_ids {
            let hi = self.index[&h];
            let fwd = reach(hi, n, |i| self.downstream[i].iter().map(|&(t, _)| t).collect());
            let bwd = reach(hi, n, |i| upstream[i].clone());
            for i in 0..n {
                on_cycle[i] |= fwd[i] && bwd[i];
            }
        }
        for (i, ok) in on_cycle.iter().enumerate() {
            if !ok {
                return Err(node_err(self.nodes[i].id, "not on a directed cycle through a heart node"));
            }
        }
        Ok(())
    }
}

fn reach(start: usize, n: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for j in next(i) {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn validate_node(n: &RegionNode) -> Result<()> {
    if n.path.len() < 2 {
        return Err(node_err(n.id, "path needs at least two vertices"));
    }
    if n.path.iter().any(|p| !p.is_finite()) {
        return Err(node_err(n.id, "non-finite path vertex"));
    }
    if !(n.length.is_finite() && n.length > 0.0) {
        return Err(node_err(n.id, "length must be positive"));
    }
    let arc = geometry::arc_length(&n.path);
    if (n.length - arc).abs() > LENGTH_REL_TOL * arc {
        return Err(node_err(n.id, "length does not match polyline arc length"));
    }
    if !(n.blood_speed.is_finite() && n.blood_speed > 0.0) {
        return Err(node_err(n.id, "blood_speed must be positive"));
    }
    Ok(())
}

fn node_err(node: u32, rule: &str) -> Error {
    Error::Vasculature { node, rule: rule.to_string() }
}

/// Convenience constructor for a region whose length is its polyline length.
pub fn region(id: u32, name: &str, kind: RegionKind, path: Vec<Point3>, blood_speed: f64) -> RegionNode {
    let length = geometry::arc_length(&path);
    RegionNode { id, name: name.to_string(), kind, path, length, blood_speed }
}
