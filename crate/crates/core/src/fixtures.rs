//! Small hand-built vasculatures for tests, examples and sanity checks.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::features::{build_input_graph, AnchorFeatures, BuildOptions, GaussianComponent, GmmParams, GraphDesign, InputGraph};
use crate::geometry::{self, Point3};
use crate::gnn::{ConvType, Hyperparams, LossKind};
use crate::mobility_sim::{estimate_visit_probabilities, EventSpec};
use crate::profile_transform::Profile;
use crate::rng;
use crate::vasculature::{region, FlowEdge, RegionKind, ValidationOptions, VascularGraph};

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

fn edge(from: u32, to: u32) -> FlowEdge {
    FlowEdge { from, to, weight: 1.0 }
}

/// One loop `heart_left(1) -> organ(3) -> vein(4) -> heart_right(2) -> heart_left`,
/// total length 30 cm, every region flowing at `speed`.
pub fn single_cycle(speed: f64) -> VascularGraph {
    let nodes = vec![
        region(1, "heart_left", RegionKind::Heart, vec![p(0., 0., 0.), p(0., 5., 0.)], speed),
        region(2, "heart_right", RegionKind::Heart, vec![p(10., 0., 0.), p(0., 0., 0.)], speed),
        region(3, "organ", RegionKind::Organ, vec![p(0., 5., 0.), p(10., 5., 0.)], speed),
        region(4, "vein", RegionKind::Vein, vec![p(10., 5., 0.), p(10., 0., 0.)], speed),
    ];
    let edges = vec![edge(1, 3), edge(3, 4), edge(4, 2), edge(2, 1)];
    VascularGraph::new(nodes, edges, None, None, ValidationOptions::any_size()).expect("valid fixture")
}

/// `heart_left(1) -> artery(3) -> {organ_a(4), organ_b(5)} -> vein(6) -> heart_right(2) -> heart_left`.
pub fn fork_graph() -> VascularGraph {
    let nodes = vec![
        region(1, "heart_left", RegionKind::Heart, vec![p(0., 0., 0.), p(0., 2., 0.)], 10.0),
        region(2, "heart_right", RegionKind::Heart, vec![p(-2., 2., 0.), p(0., 0., 0.)], 10.0),
        region(3, "artery", RegionKind::Artery, vec![p(0., 2., 0.), p(0., 10., 0.)], 20.0),
        region(4, "organ_a", RegionKind::Organ, vec![p(0., 10., 0.), p(6., 14., 0.), p(-2., 12., 0.)], 1.0),
        region(5, "organ_b", RegionKind::Organ, vec![p(0., 10., 0.), p(-6., 14., 0.), p(-2., 12., 0.)], 1.0),
        region(6, "vein", RegionKind::Vein, vec![p(-2., 12., 0.), p(-2., 2., 0.)], 10.0),
    ];
    let edges = vec![edge(1, 3), edge(3, 4), edge(3, 5), edge(4, 6), edge(5, 6), edge(6, 2), edge(2, 1)];
    VascularGraph::new(nodes, edges, None, None, ValidationOptions::any_size()).expect("valid fixture")
}

/// Nested forks with a re-joining branch, used to check visit probabilities
/// against an exact absorbing-chain computation:
///
/// ```text
/// heart_left(1) -> artery(3) -> {a(4), b(5), c(6)}
/// a -> vein(9);  b -> {d(7), e(8)};  c -> e;  d -> vein;  e -> vein
/// vein -> heart_right(2) -> heart_left
/// ```
pub fn nested_fork_graph() -> VascularGraph {
    let nodes = vec![
        region(1, "heart_left", RegionKind::Heart, vec![p(0., 0., 0.), p(0., 2., 0.)], 10.0),
        region(2, "heart_right", RegionKind::Heart, vec![p(-3., 2., 0.), p(0., 0., 0.)], 10.0),
        region(3, "artery", RegionKind::Artery, vec![p(0., 2., 0.), p(0., 10., 0.)], 20.0),
        region(4, "a", RegionKind::Organ, vec![p(0., 10., 0.), p(4., 14., 0.)], 1.0),
        region(5, "b", RegionKind::Artery, vec![p(0., 10., 0.), p(0., 16., 0.)], 20.0),
        region(6, "c", RegionKind::Limb, vec![p(0., 10., 0.), p(-4., 14., 0.)], 1.0),
        region(7, "d", RegionKind::Head, vec![p(0., 16., 0.), p(2., 20., 0.)], 1.0),
        region(8, "e", RegionKind::Organ, vec![p(0., 16., 0.), p(-2., 20., 0.)], 1.0),
        region(9, "vein", RegionKind::Vein, vec![p(-3., 20., 0.), p(-3., 2., 0.)], 10.0),
    ];
    let edges = vec![
        edge(1, 3),
        edge(3, 4),
        edge(3, 5),
        edge(3, 6),
        edge(4, 9),
        edge(5, 7),
        edge(5, 8),
        edge(6, 8),
        edge(7, 9),
        edge(8, 9),
        edge(9, 2),
        edge(2, 1),
    ];
    VascularGraph::new(nodes, edges, None, None, ValidationOptions::any_size()).expect("valid fixture")
}

/// Every polyline is a vertical segment on the `x = z = 0` axis.
pub fn vertical_graph() -> VascularGraph {
    let nodes = vec![
        region(1, "heart_left", RegionKind::Heart, vec![p(0., 0., 0.), p(0., 2., 0.)], 5.0),
        region(2, "heart_right", RegionKind::Heart, vec![p(0., 2., 0.), p(0., 0., 0.)], 5.0),
        region(3, "artery", RegionKind::Artery, vec![p(0., 2., 0.), p(0., 10., 0.)], 20.0),
        region(4, "organ", RegionKind::Organ, vec![p(0., 10., 0.), p(0., 20., 0.), p(0., 12., 0.)], 1.0),
        region(5, "vein", RegionKind::Vein, vec![p(0., 12., 0.), p(0., 2., 0.)], 10.0),
    ];
    let edges = vec![edge(1, 3), edge(3, 4), edge(4, 5), edge(5, 2), edge(2, 1)];
    VascularGraph::new(nodes, edges, None, None, ValidationOptions::any_size()).expect("valid fixture")
}

/// Total polyline length of all regions (the loop length of [`single_cycle`]).
pub fn cycle_length(g: &VascularGraph) -> f64 {
    g.nodes().iter().map(|n| n.length).sum()
}

/// Event at fraction `frac` of region `id`'s arc length.
pub fn event_on(g: &VascularGraph, id: u32, frac: f64) -> EventSpec {
    let node = g.node(id).expect("region exists");
    EventSpec { region_id: id, location: geometry::point_at(&node.path, frac * node.length) }
}

/// `heart_left(1) -> artery(3) -> {organ 10, 11, ...} -> vein(4) -> heart_right(2)`
/// with `organs` parallel organ regions. Organ `10 + i` is `4 + i` cm long.
pub fn star_graph(organs: u32) -> VascularGraph {
    let mut nodes = vec![
        region(1, "heart_left", RegionKind::Heart, vec![p(0., 0., 0.), p(0., 2., 0.)], 10.0),
        region(2, "heart_right", RegionKind::Heart, vec![p(-2., 2., 0.), p(0., 0., 0.)], 10.0),
        region(3, "artery", RegionKind::Artery, vec![p(0., 2., 0.), p(0., 10., 0.)], 20.0),
        region(4, "vein", RegionKind::Vein, vec![p(-2., 10., 0.), p(-2., 2., 0.)], 10.0),
    ];
    let mut edges = vec![edge(1, 3), edge(4, 2), edge(2, 1)];
    for i in 0..organs {
        let id = 10 + i;
        let len = 4.0 + f64::from(i);
        // a V out along z whose two legs are half the length each
        let half = 0.5 * len;
        let depth = crate::math::sqrt((half * half - 1.0).max(0.0));
        let path = vec![p(0., 10., 0.), p(-1., 10., depth), p(-2., 10., 0.)];
        nodes.push(region(id, &alloc::format!("organ_{i}"), RegionKind::Organ, path, 1.0));
        edges.push(edge(3, id));
        edges.push(edge(id, 4));
    }
    VascularGraph::new(nodes, edges, None, None, ValidationOptions::any_size()).expect("valid fixture")
}

/// Labeled design-c graphs over [`star_graph`]`(25)`, `copies` per organ. The
/// anchor of organ `r` sees one clean loop time (organ length + 2 s, jittered
/// by at most 0.05 s) and a second mode 3 s later, so every organ has its own
/// signature and nothing else differs.
pub fn separable_set(copies: u64, salt: u64) -> Vec<InputGraph> {
    let g = star_graph(25);
    let probs = estimate_visit_probabilities(&g, 2000, 1).expect("fixture graph");
    let mut out = Vec::new();
    for &rid in g.event_region_ids() {
        let len = g.node(rid).expect("organ").length;
        for c in 0..copies {
            let mut r = rng::stream(salt, &[u64::from(rid), c]);
            let loop_time = len + 2.0 + r.gen_range(-0.05..0.05);
            let comp = |mean: f64| GaussianComponent { mean, variance: 0.01, weight: 0.5 };
            let feats = AnchorFeatures {
                gmm: GmmParams { components: [comp(loop_time), comp(loop_time + 3.0)], log_likelihood: 0.0 },
                avg_positive_bits: 1.0,
            };
            let mut ig = build_input_graph(&g, &feats, &Profile::original(), GraphDesign::C, Some(&probs), BuildOptions::default())
                .expect("fixture graph");
            ig.truth_region = Some(rid);
            out.push(ig);
        }
    }
    out
}

/// Five regions (two hearts, an artery, an organ and a vein) with jittered
/// geometry and, half the time, an artery-to-vein shunt.
pub fn five_region_graph(r: &mut impl Rng) -> VascularGraph {
    let mut q = |x: f64, y: f64| Point3::new(x + r.gen_range(-0.5..0.5), y + r.gen_range(-0.5..0.5), r.gen_range(-1.0..1.0));
    let nodes = vec![
        region(1, "heart_left", RegionKind::Heart, vec![q(0., 0.), q(0., 2.)], 10.0),
        region(2, "heart_right", RegionKind::Heart, vec![q(-2., 2.), q(0., 0.)], 10.0),
        region(3, "artery", RegionKind::Artery, vec![q(0., 2.), q(0., 9.)], 20.0),
        region(4, "organ", RegionKind::Organ, vec![q(0., 10.), q(3., 12.), q(-2., 11.)], 1.0),
        region(5, "vein", RegionKind::Vein, vec![q(-2., 11.), q(-2., 2.)], 10.0),
    ];
    let mut edges = vec![edge(1, 3), edge(3, 4), edge(4, 5), edge(5, 2), edge(2, 1)];
    if r.gen_bool(0.5) {
        edges.push(FlowEdge { from: 3, to: 5, weight: r.gen_range(0.2..2.0) });
    }
    VascularGraph::new(nodes, edges, None, None, ValidationOptions::any_size()).expect("valid fixture")
}

/// A random labeled input graph on [`five_region_graph`] with inputs of order
/// one, plus hyperparameters (hidden width 8) and a loss for gradient checks.
/// Even seeds use GAT convolutions, odd seeds GCN; the design cycles through
/// all four and every fifth seed uses the focal loss.
pub fn gradient_case(seed: u64) -> (InputGraph, Hyperparams, LossKind) {
    let mut r = rng::stream(seed, &[0x6ead]);
    let g = five_region_graph(&mut r);
    let probs = estimate_visit_probabilities(&g, 200, seed).expect("fixture graph");
    let comp = |r: &mut rng::StreamRng| GaussianComponent {
        mean: r.gen_range(-1.0..1.0),
        variance: r.gen_range(0.1..1.0),
        weight: r.gen_range(0.0..1.0),
    };
    let feats = AnchorFeatures {
        gmm: GmmParams { components: [comp(&mut r), comp(&mut r)], log_likelihood: 0.0 },
        avg_positive_bits: r.gen_range(0.0..2.0),
    };
    let design = GraphDesign::ALL[seed as usize % 4];
    let profile = Profile::new("p", r.gen_range(0.8..1.2), r.gen_range(0.8..1.2), r.gen_range(0.7..1.4));
    let opts = BuildOptions { undirected_probability_edges: r.gen_bool(0.5) };
    let mut ig = build_input_graph(&g, &feats, &profile, design, Some(&probs), opts).expect("fixture graph");
    for v in &mut ig.region_features.data {
        *v = *v / 20.0 + r.gen_range(-0.3..0.3);
    }
    if let Some(m) = &mut ig.master_features {
        for v in &mut m.data {
            *v = v.min(2.0) + r.gen_range(-0.3..0.3);
        }
    }
    ig.truth_region = Some(ig.region_ids[r.gen_range(0..ig.num_regions())]);

    let h = Hyperparams {
        hidden_channels: 8,
        hgt_heads: [1, 2, 4][r.gen_range(0..3)],
        gat_heads: r.gen_range(1..=3),
        hgt_layers: r.gen_range(1..=2),
        first_layers: r.gen_range(1..=2),
        last_layers: r.gen_range(1..=2),
        conv_type: if seed % 2 == 0 { ConvType::Gat } else { ConvType::Gcn },
        learning_rate: 1e-3,
        weight_decay: 1e-3,
        max_grad_norm: 1.0,
    };
    let loss = if seed % 5 == 4 { LossKind::Focal { gamma: 2.0 } } else { LossKind::Bce };
    (ig, h, loss)
}
