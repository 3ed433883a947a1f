use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hyper::{ConvType, Hyperparams, SearchSpace};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::features::{EdgeType, GraphSchema, InputGraph, NodeType};
use crate::math;
use crate::matrix::Matrix;
use crate::rng;

const GAT_SLOPE: f64 = 0.2;

/// Loss applied to the per-region logits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Bce,
    Focal { gamma: f64 },
}

/// Named parameter tensors of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hyper: Hyperparams,
    pub schema: GraphSchema,
    pub names: Vec<String>,
    pub tensors: Vec<Matrix>,
}

impl ModelParams {
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    fn index(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("missing parameter {name}"))
    }
}

struct Spec {
    name: String,
    rows: usize,
    cols: usize,
    fan_in: usize,
}

fn node_type_name(t: NodeType) -> &'static str {
    match t {
        NodeType::Region => "region",
        NodeType::Anchor => "anchor",
        NodeType::Master => "master",
    }
}

/// Node types that receive heterogeneous messages.
fn hgt_targets(schema: &GraphSchema) -> Vec<NodeType> {
    let mut out = Vec::new();
    for t in [NodeType::Region, NodeType::Anchor, NodeType::Master] {
        if schema.edge_types.iter().any(|e| e.target() == t) {
            out.push(t);
        }
    }
    out
}

fn check_schema(schema: &GraphSchema) -> Result<()> {
    let has = |e: EdgeType| schema.edge_types.contains(&e);
    if !has(EdgeType::Adjacency) || !has(EdgeType::AnchorToRegion) {
        return Err(Error::Schema("adjacency and anchor edges are required".into()));
    }
    let master_edges = has(EdgeType::MasterToRegion) || has(EdgeType::MasterToAnchor);
    if master_edges != schema.master_dim.is_some() {
        return Err(Error::Schema("master edges without a master node (or the reverse)".into()));
    }
    if schema.region_dim == 0 || schema.anchor_dim == 0 || schema.master_dim == Some(0) {
        return Err(Error::Schema("zero-width node features".into()));
    }
    Ok(())
}

fn layout(h: &Hyperparams, schema: &GraphSchema) -> Vec<Spec> {
    let hc = h.hidden_channels;
    let mut specs = Vec::new();
    let mut push = |name: String, rows: usize, cols: usize, fan_in: usize| specs.push(Spec { name, rows, cols, fan_in });

    let mut embed = vec![(NodeType::Region, schema.region_dim), (NodeType::Anchor, schema.anchor_dim)];
    if let Some(d) = schema.master_dim {
        embed.push((NodeType::Master, d));
    }
    for (t, d) in embed {
        let t = node_type_name(t);
        push(format!("embed.{t}.w"), d, hc, d);
        push(format!("embed.{t}.b"), 1, hc, d);
    }

    let conv = |push: &mut dyn FnMut(String, usize, usize, usize), prefix: &str, layers: usize| {
        for l in 0..layers {
            match h.conv_type {
                ConvType::Gat => {
                    let width = h.gat_heads * hc;
                    push(format!("{prefix}.{l}.w"), hc, width, hc);
                    push(format!("{prefix}.{l}.att_src"), 1, width, hc);
                    push(format!("{prefix}.{l}.att_dst"), 1, width, hc);
                }
                ConvType::Gcn => push(format!("{prefix}.{l}.w"), hc, hc, hc),
            }
            push(format!("{prefix}.{l}.b"), 1, hc, hc);
        }
    };

    conv(&mut push, "first", h.first_layers);
    let targets = hgt_targets(schema);
    for l in 0..h.hgt_layers {
        for &t in &targets {
            push(format!("hgt.{l}.q.{}", node_type_name(t)), hc, hc, hc);
        }
        for e in &schema.edge_types {
            push(format!("hgt.{l}.k.{e}"), hc, hc, hc);
            push(format!("hgt.{l}.v.{e}"), hc, hc, hc);
        }
        for &t in &targets {
            let t = node_type_name(t);
            push(format!("hgt.{l}.o.{t}"), hc, hc, hc);
            push(format!("hgt.{l}.ob.{t}"), 1, hc, hc);
        }
    }
    conv(&mut push, "last", h.last_layers);
    push("out.w".into(), hc, 1, hc);
    push("out.b".into(), 1, 1, hc);
    specs
}

/// Fresh parameters for `schema`, validated against the standard domain.
///
/// Every entry is uniform in `±1/sqrt(fan_in)`.
pub fn init_model(h: &Hyperparams, schema: &GraphSchema, seed: u64) -> Result<ModelParams> {
    init_model_in(h, schema, seed, &SearchSpace::default())
}

pub fn init_model_in(h: &Hyperparams, schema: &GraphSchema, seed: u64, space: &SearchSpace) -> Result<ModelParams> {
    h.validate_in(space)?;
    if h.hidden_channels == 0 || h.hgt_heads == 0 || h.gat_heads == 0 || h.hidden_channels % h.hgt_heads != 0 {
        return Err(Error::Hyperparam { field: "hidden_channels", value: format!("{}", h.hidden_channels) });
    }
    check_schema(schema)?;
    let mut rng = rng::stream(seed, &[schema.fingerprint()]);
    let (mut names, mut tensors) = (Vec::new(), Vec::new());
    for s in layout(h, schema) {
        let bound = 1.0 / math::sqrt(s.fan_in as f64);
        let data = (0..s.rows * s.cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        names.push(s.name);
        tensors.push(Matrix::from_vec(s.rows, s.cols, data));
    }
    Ok(ModelParams { hyper: *h, schema: schema.clone(), names, tensors })
}

/// Region-to-region edges used by the homogeneous layers, self-loops included.
struct ConvEdges {
    src: Vec<usize>,
    dst: Vec<usize>,
    weight: Vec<f64>,
    gcn_coeff: Vec<f64>,
}

impl ConvEdges {
    fn new(g: &InputGraph) -> Self {
        let n = g.num_regions();
        let (mut src, mut dst, mut weight): (Vec<usize>, Vec<usize>, Vec<f64>) =
            ((0..n).collect(), (0..n).collect(), vec![1.0; n]);
        for e in g.edges.iter().filter(|e| e.kind.is_region_region()) {
            src.extend(&e.src);
            dst.extend(&e.dst);
            weight.extend(&e.weight);
        }
        let mut deg = vec![0.0f64; n];
        for &d in &dst {
            deg[d] += 1.0;
        }
        let gcn_coeff = src.iter().zip(&dst).zip(&weight).map(|((&s, &d), &w)| w / math::sqrt(deg[s] * deg[d])).collect();
        Self { src, dst, weight, gcn_coeff }
    }
}

struct Net<'a> {
    m: &'a ModelParams,
    tape: Tape,
    vars: Vec<Var>,
}

impl<'a> Net<'a> {
    fn p(&self, name: &str) -> Var {
        self.vars[self.m.index(name)]
    }

    fn check(&self, v: Var, layer: usize, stage: &'static str) -> Result<()> {
        if self.tape.value(v).is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { layer, stage })
        }
    }

    fn conv(&mut self, x: Var, edges: &ConvEdges, prefix: &str, l: usize, n: usize) -> Var {
        let h = &self.m.hyper;
        let w = self.p(&format!("{prefix}.{l}.w"));
        let b = self.p(&format!("{prefix}.{l}.b"));
        let z = self.tape.matmul(x, w);
        let agg = match h.conv_type {
            ConvType::Gcn => {
                let msg = self.tape.gather(z, edges.src.clone());
                let msg = self.tape.mul_const_rows(msg, edges.gcn_coeff.clone());
                self.tape.scatter_add(msg, edges.dst.clone(), n)
            }
            ConvType::Gat => {
                let heads = h.gat_heads;
                let a_src = self.p(&format!("{prefix}.{l}.att_src"));
                let a_dst = self.p(&format!("{prefix}.{l}.att_dst"));
                let a_src = self.tape.gather(a_src, vec![0; n]);
                let a_dst = self.tape.gather(a_dst, vec![0; n]);
                let s_src = self.tape.head_dot(z, a_src, heads);
                let s_dst = self.tape.head_dot(z, a_dst, heads);
                let e_src = self.tape.gather(s_src, edges.src.clone());
                let e_dst = self.tape.gather(s_dst, edges.dst.clone());
                let score = self.tape.add(e_src, e_dst);
                let score = self.tape.leaky_relu(score, GAT_SLOPE);
                let alpha = self.tape.segment_softmax(score, edges.dst.clone(), n);
                let alpha = self.tape.mul_const_rows(alpha, edges.weight.clone());
                let msg = self.tape.gather(z, edges.src.clone());
                let msg = self.tape.head_scale(msg, alpha, heads);
                let agg = self.tape.scatter_add(msg, edges.dst.clone(), n);
                self.tape.head_mean(agg, heads)
            }
        };
        let out = self.tape.add_bias(agg, b);
        self.tape.relu(out)
    }

    fn hgt(&mut self, g: &InputGraph, l: usize, state: &mut [Option<Var>; 3]) {
        let hc = self.m.hyper.hidden_channels;
        let heads = self.m.hyper.hgt_heads;
        let scale = 1.0 / math::sqrt((hc / heads) as f64);
        let slot = |t: NodeType| t as usize;
        let count = |t: NodeType| match t {
            NodeType::Region => g.num_regions(),
            _ => 1,
        };
        let mut next = *state;
        for t in hgt_targets(&self.m.schema) {
            let (Some(h_t), n_t) = (state[slot(t)], count(t)) else { continue };
            let (mut keys, mut values, mut dst, mut weight) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for e in g.edges.iter().filter(|e| e.kind.target() == t && !e.is_empty()) {
                let Some(h_s) = state[slot(e.kind.source())] else { continue };
                let wk = self.p(&format!("hgt.{l}.k.{}", e.kind));
                let wv = self.p(&format!("hgt.{l}.v.{}", e.kind));
                let k = self.tape.matmul(h_s, wk);
                let v = self.tape.matmul(h_s, wv);
                keys.push(self.tape.gather(k, e.src.clone()));
                values.push(self.tape.gather(v, e.src.clone()));
                dst.extend(&e.dst);
                weight.extend(&e.weight);
            }
            if keys.is_empty() {
                continue;
            }
            let tn = node_type_name(t);
            let wq = self.p(&format!("hgt.{l}.q.{tn}"));
            let q = self.tape.matmul(h_t, wq);
            let q = self.tape.gather(q, dst.clone());
            let k = self.tape.concat_rows(keys);
            let v = self.tape.concat_rows(values);
            let score = self.tape.head_dot(q, k, heads);
            let score = self.tape.scale(score, scale);
            let alpha = self.tape.segment_softmax(score, dst.clone(), n_t);
            let alpha = self.tape.mul_const_rows(alpha, weight);
            let msg = self.tape.head_scale(v, alpha, heads);
            let agg = self.tape.scatter_add(msg, dst, n_t);
            let wo = self.p(&format!("hgt.{l}.o.{tn}"));
            let bo = self.p(&format!("hgt.{l}.ob.{tn}"));
            let out = self.tape.linear(agg, wo, bo);
            let out = self.tape.relu(out);
            next[slot(t)] = Some(self.tape.add(h_t, out));
        }
        *state = next;
    }

    /// Builds the forward pass and returns the `[n x 1]` logits.
    fn run(&mut self, g: &InputGraph) -> Result<Var> {
        let n = g.num_regions();
        let h = self.m.hyper;
        let mut layer = 0;

        let embed = |net: &mut Self, t: &str, x: &Matrix| {
            let x = net.tape.leaf(x.clone());
            let w = net.p(&format!("embed.{t}.w"));
            let b = net.p(&format!("embed.{t}.b"));
            let y = net.tape.linear(x, w, b);
            net.tape.relu(y)
        };
        let region = embed(self, "region", &g.region_features);
        let anchor = embed(self, "anchor", &g.anchor_features);
        let master = g.master_features.as_ref().map(|m| embed(self, "master", m));
        for v in [Some(region), Some(anchor), master].into_iter().flatten() {
            self.check(v, layer, "embedding")?;
        }

        let edges = ConvEdges::new(g);
        let mut x = region;
        for l in 0..h.first_layers {
            layer += 1;
            x = self.conv(x, &edges, "first", l, n);
            self.check(x, layer, "first convolution")?;
        }
        let mut state = [Some(x), Some(anchor), master];
        for l in 0..h.hgt_layers {
            layer += 1;
            self.hgt(g, l, &mut state);
            for v in state.iter().flatten() {
                self.check(*v, layer, "heterogeneous attention")?;
            }
        }
        let mut x = state[NodeType::Region as usize].expect("region state");
        for l in 0..h.last_layers {
            layer += 1;
            x = self.conv(x, &edges, "last", l, n);
            self.check(x, layer, "last convolution")?;
        }
        let logits = self.tape.linear(x, self.p("out.w"), self.p("out.b"));
        self.check(logits, layer + 1, "output")?;
        Ok(logits)
    }
}

fn build<'a>(m: &'a ModelParams, g: &InputGraph) -> Result<(Net<'a>, Var)> {
    let gs = g.schema();
    if gs != m.schema {
        return Err(Error::Schema(format!("model expects {:?}, graph has {:?}", m.schema, gs)));
    }
    g.validate()?;
    let mut tape = Tape::new();
    let vars = m.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
    let mut net = Net { m, tape, vars };
    let logits = net.run(g)?;
    Ok((net, logits))
}

/// Per-region logits in `g.region_ids` order.
pub fn logits(m: &ModelParams, g: &InputGraph) -> Result<Vec<f64>> {
    let (net, y) = build(m, g)?;
    Ok(net.tape.value(y).data.clone())
}

/// Per-region probability of hosting the event.
pub fn forward(m: &ModelParams, g: &InputGraph) -> Result<Vec<f64>> {
    Ok(logits(m, g)?.into_iter().map(math::sigmoid).collect())
}

/// Signs of every rectifier input during the forward pass. Two parameter
/// vectors with equal patterns lie in the same smooth piece of the loss.
pub fn activation_pattern(m: &ModelParams, g: &InputGraph) -> Result<Vec<bool>> {
    let (net, _) = build(m, g)?;
    Ok(net.tape.activation_pattern())
}

fn loss_tape<'a>(m: &'a ModelParams, g: &InputGraph, weight_decay: f64, kind: LossKind) -> Result<(Net<'a>, Var)> {
    let target = g.target().ok_or_else(|| Error::InputGraph("graph has no ground-truth region".into()))?;
    let (mut net, logits) = build(m, g)?;
    let mut loss = match kind {
        LossKind::Bce => net.tape.bce_with_logits(logits, target),
        LossKind::Focal { gamma } => net.tape.focal_with_logits(logits, target, gamma),
    };
    if weight_decay != 0.0 {
        for i in 0..net.vars.len() {
            let sq = net.tape.sum_squares(net.vars[i]);
            let sq = net.tape.scale(sq, 0.5 * weight_decay);
            loss = net.tape.add(loss, sq);
        }
    }
    Ok((net, loss))
}

/// Mean binary cross-entropy over region nodes plus `weight_decay / 2 * |θ|²`.
pub fn loss(m: &ModelParams, g: &InputGraph, weight_decay: f64) -> Result<f64> {
    loss_with(m, g, weight_decay, LossKind::Bce)
}

pub fn loss_with(m: &ModelParams, g: &InputGraph, weight_decay: f64, kind: LossKind) -> Result<f64> {
    let (net, l) = loss_tape(m, g, weight_decay, kind)?;
    Ok(net.tape.value(l).get(0, 0))
}

/// Loss and its gradient with respect to every tensor of `m`, in order.
pub fn loss_and_gradients(m: &ModelParams, g: &InputGraph, weight_decay: f64) -> Result<(f64, Vec<Matrix>)> {
    loss_and_gradients_with(m, g, weight_decay, LossKind::Bce)
}

pub fn loss_and_gradients_with(
    m: &ModelParams,
    g: &InputGraph,
    weight_decay: f64,
    kind: LossKind,
) -> Result<(f64, Vec<Matrix>)> {
    let (net, l) = loss_tape(m, g, weight_decay, kind)?;
    let value = net.tape.value(l).get(0, 0);
    let mut adj = net.tape.backward(l);
    let grads = net
        .vars
        .iter()
        .zip(&m.tensors)
        .map(|(v, t)| adj[v.0].take().unwrap_or_else(|| Matrix::zeros(t.rows, t.cols)))
        .collect();
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_input_graph, AnchorFeatures, BuildOptions, GmmParams, GraphDesign};
    use crate::fixtures;
    use crate::mobility_sim::estimate_visit_probabilities;
    use crate::profile_transform::Profile;

    fn graph(design: GraphDesign) -> InputGraph {
        let g = fixtures::fork_graph();
        let probs = estimate_visit_probabilities(&g, 200, 1).unwrap();
        let f = AnchorFeatures { gmm: GmmParams::SENTINEL, avg_positive_bits: 0.3 };
        let mut ig = build_input_graph(&g, &f, &Profile::original(), design, Some(&probs), BuildOptions::default()).unwrap();
        ig.truth_region = Some(4);
        ig
    }

    fn small(conv_type: ConvType) -> Hyperparams {
        Hyperparams { hidden_channels: 16, hgt_heads: 2, gat_heads: 2, hgt_layers: 1, first_layers: 1, last_layers: 1, conv_type, ..Default::default() }
    }

    #[test]
    fn outputs_are_probabilities() {
        for design in GraphDesign::ALL {
            for ct in [ConvType::Gat, ConvType::Gcn] {
                let ig = graph(design);
                let m = init_model(&small(ct), &ig.schema(), 3).unwrap();
                let p = forward(&m, &ig).unwrap();
                assert_eq!(p.len(), ig.num_regions());
                assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
            }
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let ig = graph(GraphDesign::C);
        let a = init_model(&small(ConvType::Gat), &ig.schema(), 9).unwrap();
        let b = init_model(&small(ConvType::Gat), &ig.schema(), 9).unwrap();
        let c = init_model(&small(ConvType::Gat), &ig.schema(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let w = a.get("embed.region.w").unwrap();
        let bound = 1.0 / (w.rows as f64).sqrt();
        assert!(w.data.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let m = init_model(&small(ConvType::Gat), &graph(GraphDesign::Baseline).schema(), 0).unwrap();
        assert!(matches!(forward(&m, &graph(GraphDesign::C)), Err(Error::Schema(_))));
    }

    #[test]
    fn weight_decay_term() {
        let ig = graph(GraphDesign::A);
        let m = init_model(&small(ConvType::Gcn), &ig.schema(), 2).unwrap();
        let base = loss(&m, &ig, 0.0).unwrap();
        let with = loss(&m, &ig, 1e-3).unwrap();
        let norm: f64 = m.tensors.iter().map(Matrix::sum_squares).sum();
        assert!((with - base - 0.5e-3 * norm).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_reports_layer() {
        let ig = graph(GraphDesign::A);
        let mut m = init_model(&small(ConvType::Gat), &ig.schema(), 2).unwrap();
        let i = m.names.iter().position(|n| n == "hgt.0.o.region").unwrap();
        m.tensors[i].data[0] = f64::NAN;
        assert!(matches!(forward(&m, &ig), Err(Error::NonFinite { layer: 2, .. })));
    }

    #[test]
    fn unlabeled_graph_has_no_loss() {
        let mut ig = graph(GraphDesign::A);
        ig.truth_region = None;
        let m = init_model(&small(ConvType::Gat), &ig.schema(), 2).unwrap();
        assert!(loss(&m, &ig, 0.0).is_err());
    }
}
