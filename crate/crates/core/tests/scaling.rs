use flowloc_core::fixtures;
use flowloc_core::mobility_sim::{simulate, RawDataset, SimulationConfig};
use flowloc_core::profile_transform::{radius_scale, scale_graph, transform_dataset, Profile};

fn dataset(g: &flowloc_core::vasculature::VascularGraph, region: u32, seed: u64) -> RawDataset {
    let cfg = SimulationConfig { num_nanodevices: 8, sim_time: 400.0, seed, ..Default::default() };
    simulate(g, &cfg, &fixtures::event_on(g, region, 0.4)).unwrap()
}

#[test]
fn radius_scale_preserves_volume_ratio() {
    for &(w, h) in &[(1.0, 1.0), (1.3, 1.15), (0.77, 0.87), (1.44, 1.0), (0.5, 2.0), (3.7, 0.31)] {
        let k = radius_scale(w, h).unwrap();
        assert!((k * k * h - w).abs() <= 1e-12, "w={w} h={h}");
    }
}

#[test]
fn identity_profile_round_trips() {
    let g = fixtures::fork_graph();
    for seed in 0..4 {
        let raw = dataset(&g, 4, seed);
        let out = transform_dataset(&raw, &g, &Profile::original()).unwrap();
        assert_eq!(out.records.len(), raw.records.len());
        for (a, b) in raw.records.iter().zip(&out.records) {
            assert_eq!(a.nanodevice_id, b.nanodevice_id);
            assert_eq!(a.event_bit, b.event_bit);
            assert!((a.circulation_time - b.circulation_time).abs() <= 1e-9 * a.circulation_time);
            assert!((a.timestamp - b.timestamp).abs() <= 1e-9 * a.timestamp);
        }
        assert_eq!(out.event, raw.event);
    }
}

#[test]
fn activity_scale_divides_times_exactly() {
    let g = fixtures::fork_graph();
    let raw = dataset(&g, 5, 7);
    let id = transform_dataset(&raw, &g, &Profile::original()).unwrap();
    for s in [2.0, 0.5, 4.0] {
        let out = transform_dataset(&raw, &g, &Profile::new("act", 1.0, 1.0, s)).unwrap();
        for (a, b) in id.records.iter().zip(&out.records) {
            assert_eq!(b.circulation_time, a.circulation_time / s, "s = {s}");
        }
    }
    // and against the raw simulator output, to rounding
    let fast = transform_dataset(&raw, &g, &Profile::new("act", 1.0, 1.0, 2.0)).unwrap();
    for (a, b) in raw.records.iter().zip(&fast.records) {
        assert!((b.circulation_time - a.circulation_time / 2.0).abs() <= 1e-12 * a.circulation_time);
    }
}

#[test]
fn vertical_vessels_scale_with_height() {
    let g = fixtures::vertical_graph();
    let raw = dataset(&g, 4, 3);
    for h in [1.15, 0.87, 1.3] {
        // weight tracks height so the horizontal factor is one
        let p = Profile::new("v", h, h, 1.0);
        let out = transform_dataset(&raw, &g, &p).unwrap();
        for (a, b) in raw.records.iter().zip(&out.records) {
            assert!((b.circulation_time - h * a.circulation_time).abs() <= 1e-9 * a.circulation_time, "h = {h}");
        }
        let sg = scale_graph(&g, &p).unwrap();
        for (o, s) in g.nodes().iter().zip(sg.nodes()) {
            assert!((s.length - h * o.length).abs() < 1e-12 * o.length);
        }
    }
}

#[test]
fn horizontal_only_profile_leaves_vertical_times() {
    let g = fixtures::vertical_graph();
    let raw = dataset(&g, 4, 9);
    let out = transform_dataset(&raw, &g, &Profile::new("wide", 1.0, 1.7, 1.0)).unwrap();
    for (a, b) in raw.records.iter().zip(&out.records) {
        assert!((a.circulation_time - b.circulation_time).abs() <= 1e-9 * a.circulation_time);
    }
}

#[test]
fn transform_names_the_profile_and_scales_the_event() {
    let g = fixtures::fork_graph();
    let raw = dataset(&g, 4, 1);
    let p = Profile::new("tall", 1.15, 1.0, 1.0);
    let out = transform_dataset(&raw, &g, &p).unwrap();
    assert_eq!(out.profile, "tall");
    assert!((out.event.location.y - 1.15 * raw.event.location.y).abs() < 1e-12);
}
