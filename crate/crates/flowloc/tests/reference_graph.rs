//! Checks against the bundled reference vasculature.

use flowloc::io::{parse_vasculature, REFERENCE_VASCULATURE};
use flowloc_core::geometry::{arc_length, distance_to_path, point_at};
use flowloc_core::mobility_sim::{estimate_visit_probabilities, simulate, EventSpec, SimulationConfig};
use flowloc_core::vasculature::{RegionKind, VascularGraph};
use flowloc_core::Point3;

fn reference() -> VascularGraph {
    parse_vasculature(REFERENCE_VASCULATURE, "bundled").unwrap()
}

#[test]
fn every_region_drains_to_a_heart_and_lengths_match() {
    let g = reference();
    assert_eq!(g.heart_ids().len(), 2);
    assert_eq!(g.event_region_ids().len(), 25);
    let hearts = g.heart_ids();
    for node in g.nodes() {
        assert!((node.length - arc_length(&node.path)).abs() <= 1e-6 * node.length, "region {}", node.id);
        let mut cur = node.id;
        let mut steps = 0;
        while !hearts.contains(&cur) {
            cur = g.neighbors_downstream(cur).unwrap()[0];
            steps += 1;
            assert!(steps <= g.len(), "region {} never reaches a heart", node.id);
        }
    }
}

/// Arc length of `path` lying strictly within `radius` of `p`, by fine sampling.
fn covered_length(path: &[Point3], p: &Point3, radius: f64) -> f64 {
    let total = arc_length(path);
    let steps = (total / 1e-4).ceil() as usize;
    let ds = total / steps as f64;
    (0..steps).filter(|&i| point_at(path, (i as f64 + 0.5) * ds).distance(p) < radius).count() as f64 * ds
}

#[test]
fn detection_rate_matches_tick_geometry() {
    let g = reference();
    // every pass reported, so each record is one pass of the event
    let cfg = SimulationConfig { report_success_prob: 1.0, retain_positions: false, ..Default::default() };
    let probs = estimate_visit_probabilities(&g, 10_000, 3).unwrap();

    // the longest straight segment of an always-visited vessel
    let (node, a, b) = g
        .nodes()
        .iter()
        .filter(|n| n.kind != RegionKind::Heart && probs.get(n.id) == Some(1.0))
        .flat_map(|n| n.path.windows(2).map(move |w| (n, w[0], w[1])))
        .max_by(|x, y| x.1.distance(&x.2).total_cmp(&y.1.distance(&y.2)))
        .expect("an always-visited vessel");
    assert!(a.distance(&b) > 4.0 * cfg.detection_threshold);
    let location = a.lerp(&b, 0.5);
    for other in g.nodes().iter().filter(|o| o.id != node.id) {
        assert!(distance_to_path(&other.path, &location) > cfg.detection_threshold, "region {} passes the event", other.id);
    }

    // a pass is caught when a tick of uniform phase falls in the covered window
    let window = covered_length(&node.path, &location, cfg.detection_threshold) / node.blood_speed;
    let expected = (window * cfg.sampling_rate).min(1.0);

    let event = EventSpec { region_id: node.id, location };
    let (mut hits, mut total) = (0usize, 0usize);
    for seed in 0..10 {
        let d = simulate(&g, &SimulationConfig { seed, ..cfg.clone() }, &event).unwrap();
        hits += d.records.iter().filter(|r| r.event_bit).count();
        total += d.records.len();
    }
    let observed = hits as f64 / total as f64;
    let se = (expected * (1.0 - expected) / total as f64).sqrt();
    assert!(
        (observed - expected).abs() <= 3.0 * se,
        "region {}: observed {observed} over {total} records, expected {expected} (se {se})",
        node.name
    );
}
