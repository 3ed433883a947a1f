//! Acceptance criteria 1 to 8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use flowloc::config::{Paths, RunConfig, SimulationSection, TrainingSection};
use flowloc::manifest::{sha256_file, Manifest};
use flowloc::pipeline::{self, Context};
use flowloc_core::eval::{self, confusion_matrix, point_error, region_accuracy, Prediction};
use flowloc_core::features::{fit_gmm, fit_gmm_traced, EmSettings, GraphDesign, InputGraph, Standardization};
use flowloc_core::fixtures;
use flowloc_core::gnn::{self, check_gradients, init_model, init_model_in, ConvType, Hyperparams, LossKind, SearchSpace, TrainOptions};
use flowloc_core::mobility_sim::{estimate_visit_probabilities, simulate, DatasetKey, SimulationConfig};
use flowloc_core::profile_transform::{radius_scale, transform_dataset, Profile};
use flowloc_core::rng;
use flowloc_core::vasculature::VascularGraph;
use flowloc_core::Point3;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.1?}, budget {budget:?}"))
}

// 1. GMM

/// Plain EM with the same deterministic start, run until the parameters stop
/// moving.
fn oracle_em(xs: &[f64]) -> [(f64, f64, f64); 2] {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (s.len() - 1) as f64;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut c = [(q(0.25), var, 0.5), (q(0.75), var, 0.5)];
    for _ in 0..10_000 {
        let pdf = |x: f64, (m, v, w): (f64, f64, f64)| w * (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let r: Vec<f64> = xs.iter().map(|&x| pdf(x, c[0]) / (pdf(x, c[0]) + pdf(x, c[1]))).collect();
        let mut next = c;
        for (k, nk_w) in [(0usize, 1.0), (1, -1.0)] {
            let resp = |i: usize| if nk_w > 0.0 { r[i] } else { 1.0 - r[i] };
            let nk: f64 = (0..xs.len()).map(resp).sum();
            let m = (0..xs.len()).map(|i| resp(i) * xs[i]).sum::<f64>() / nk;
            let v = (0..xs.len()).map(|i| resp(i) * (xs[i] - m).powi(2)).sum::<f64>() / nk;
            next[k] = (m, v.max(1e-6), nk / n);
        }
        let moved = (0..2).map(|k| (next[k].0 - c[k].0).abs() + (next[k].2 - c[k].2).abs()).fold(0.0, f64::max);
        c = next;
        if moved < 1e-13 {
            break;
        }
    }
    if c[0].0 > c[1].0 {
        c.swap(0, 1);
    }
    c
}

fn criterion_gmm() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(2024, &[]);
    let lo = Normal::new(10.0, 1.0).unwrap();
    let hi = Normal::new(30.0, 2.0).unwrap();
    let mut xs: Vec<f64> = (0..500).map(|_| lo.sample(&mut r)).collect();
    xs.extend((0..500).map(|_| hi.sample(&mut r)));
    let fit = fit_gmm(&xs, &EmSettings::default()).map_err(|e| e.to_string())?;
    let [a, b] = fit.components;
    ensure((a.mean - 10.0).abs() <= 0.5 && (b.mean - 30.0).abs() <= 1.5, || format!("means {} and {}", a.mean, b.mean))?;
    ensure((a.weight - 0.5).abs() <= 0.05 && (b.weight - 0.5).abs() <= 0.05, || format!("weights {} and {}", a.weight, b.weight))?;
    let oracle = oracle_em(&xs);
    for (c, o) in [a, b].iter().zip(oracle) {
        ensure((c.mean - o.0).abs() <= 1e-3 * o.0.abs() && (c.weight - o.2).abs() <= 1e-3, || {
            format!("disagrees with the reference EM: {c:?} vs {o:?}")
        })?;
    }
    let mut steps = 0;
    for fixture in 0..100u64 {
        let n = r.gen_range(2..400);
        let (ma, sa) = (r.gen_range(0.0..50.0), r.gen_range(0.2..5.0));
        let (mb, sb) = (r.gen_range(0.0..50.0), r.gen_range(0.2..5.0));
        let share = r.gen_range(0.05..0.95);
        let (na, nb) = (Normal::new(ma, sa).unwrap(), Normal::new(mb, sb).unwrap());
        let ys: Vec<f64> = (0..n).map(|_| if r.gen::<f64>() < share { na.sample(&mut r) } else { nb.sample(&mut r) }).collect();
        let traced = fit_gmm_traced(&ys, &EmSettings::default()).map_err(|e| e.to_string())?;
        for w in traced.log_likelihood_trace.windows(2) {
            ensure(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), || format!("fixture {fixture}: log-likelihood {} -> {}", w[0], w[1]))?;
            steps += 1;
        }
    }
    within_budget(start, Duration::from_secs(5))?;
    Ok(format!("means {:.3}/{:.3}, weights {:.3}/{:.3}; {steps} EM steps non-decreasing", a.mean, b.mean, a.weight, b.weight))
}

// 2. scaling algebra

fn criterion_scaling() -> Outcome {
    let start = Instant::now();
    for (w, h) in [(1.0, 1.0), (1.3, 1.15), (0.77, 0.87), (1.3, 1.0), (0.5, 2.0), (3.7, 0.31)] {
        let k = radius_scale(w, h).map_err(|e| e.to_string())?;
        ensure((k * k * h - w).abs() <= 1e-12, || format!("k^2 h = {} for w = {w}", k * k * h))?;
    }
    let g = fixtures::fork_graph();
    let cfg = SimulationConfig { num_nanodevices: 8, sim_time: 400.0, seed: 11, ..Default::default() };
    let raw = simulate(&g, &cfg, &fixtures::event_on(&g, 5, 0.4)).map_err(|e| e.to_string())?;
    let id = transform_dataset(&raw, &g, &Profile::original()).map_err(|e| e.to_string())?;
    for (a, b) in raw.records.iter().zip(&id.records) {
        ensure((a.circulation_time - b.circulation_time).abs() <= 1e-9 * a.circulation_time, || "identity profile changed a time".into())?;
    }
    for s in [2.0, 0.5] {
        let out = transform_dataset(&raw, &g, &Profile::new("act", 1.0, 1.0, s)).map_err(|e| e.to_string())?;
        for (a, b) in id.records.iter().zip(&out.records) {
            ensure(b.circulation_time == a.circulation_time / s, || format!("s = {s}: {} vs {}", b.circulation_time, a.circulation_time / s))?;
        }
    }
    let v = fixtures::vertical_graph();
    let raw = simulate(&v, &cfg, &fixtures::event_on(&v, 4, 0.5)).map_err(|e| e.to_string())?;
    for h in [1.15, 0.87] {
        let out = transform_dataset(&raw, &v, &Profile::new("v", h, h, 1.0)).map_err(|e| e.to_string())?;
        for (a, b) in raw.records.iter().zip(&out.records) {
            ensure((b.circulation_time - h * a.circulation_time).abs() <= 1e-9 * a.circulation_time, || format!("h = {h}"))?;
        }
    }
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("{} + {} records checked", id.records.len(), raw.records.len()))
}

// 3. visit probabilities

fn exact_visit_probabilities(g: &VascularGraph) -> Vec<f64> {
    let n = g.len();
    let anchor = g.index_of(g.anchor_heart()).unwrap();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let next = g.downstream_of_index(i);
        let total: f64 = next.iter().map(|(_, w)| w).sum();
        for &(j, w) in next {
            p[(i, j)] += w / total;
        }
    }
    (0..n)
        .map(|target| {
            if target == anchor {
                return 1.0;
            }
            let mut a = DMatrix::<f64>::identity(n, n);
            let mut b = DVector::<f64>::zeros(n);
            for i in 0..n {
                if i == target {
                    b[i] = 1.0;
                } else if i != anchor {
                    for j in 0..n {
                        a[(i, j)] -= p[(i, j)];
                    }
                }
            }
            let h = a.lu().solve(&b).expect("non-singular");
            (0..n).map(|j| p[(anchor, j)] * h[j]).sum()
        })
        .collect()
}

fn criterion_probabilities() -> Outcome {
    let start = Instant::now();
    let g = fixtures::nested_fork_graph();
    let exact = exact_visit_probabilities(&g);
    let hearts = g.heart_ids();
    let mut checked = 0;
    for n_walks in [1_000u64, 10_000] {
        for seed in 0..3 {
            let est = estimate_visit_probabilities(&g, n_walks, seed).map_err(|e| e.to_string())?;
            for (node, &p) in g.nodes().iter().zip(&exact) {
                let got = est.get(node.id).ok_or("missing region")?;
                if hearts.contains(&node.id) || p == 1.0 {
                    ensure(got == 1.0, || format!("mandatory region {} reported {got}", node.id))?;
                } else {
                    let se = (p * (1.0 - p) / n_walks as f64).sqrt();
                    ensure((got - p).abs() <= 3.0 * se, || format!("region {} n={n_walks}: {got} vs {p}", node.id))?;
                }
                checked += 1;
            }
        }
    }
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!("{checked} estimates within 3 SE of the linear solve"))
}

// 4. gradients

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let space = SearchSpace::unrestricted();
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    let mut layers = BTreeSet::new();
    for seed in 0..20 {
        let (ig, h, kind) = fixtures::gradient_case(seed);
        let m = init_model_in(&h, &ig.schema(), seed, &space).map_err(|e| e.to_string())?;
        for name in &m.names {
            let layer = match name.split('.').next() {
                Some("embed") => "embedding",
                Some("first" | "last") if h.conv_type == ConvType::Gat => "GAT",
                Some("first" | "last") => "GCN",
                Some("hgt") => "HGT",
                Some("out") => "final linear",
                _ => continue,
            };
            layers.insert(layer);
        }
        let rep = check_gradients(&m, &ig, h.weight_decay, kind, 1e-5, 1e-6).map_err(|e| e.to_string())?;
        ensure(rep.worst_relative_error < 1e-4, || format!("seed {seed}: {} at {}", rep.worst_relative_error, rep.worst_at))?;
        ensure(rep.skipped * 100 <= rep.checked + rep.skipped, || format!("seed {seed}: {} kinks", rep.skipped))?;
        worst = worst.max(rep.worst_relative_error);
        checked += rep.checked;
        skipped += rep.skipped;
    }
    ensure(layers.len() == 5, || format!("layer types covered: {layers:?}"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("{checked} coordinates over {} layer types, worst relative error {worst:.2e}, {skipped} skipped at kinks", layers.len()))
}

// 5. learning

fn standardized(mut a: Vec<InputGraph>, mut b: Vec<InputGraph>) -> (Vec<InputGraph>, Vec<InputGraph>) {
    let st = Standardization::fit(&a).unwrap();
    for g in a.iter_mut().chain(b.iter_mut()) {
        st.apply(g).unwrap();
    }
    (a, b)
}

fn criterion_learning() -> Outcome {
    let start = Instant::now();
    let h = Hyperparams {
        hidden_channels: 32,
        hgt_heads: 2,
        gat_heads: 1,
        hgt_layers: 1,
        first_layers: 0,
        last_layers: 2,
        conv_type: ConvType::Gcn,
        learning_rate: 3e-3,
        weight_decay: 1e-5,
        max_grad_norm: 5.0,
    };
    let (train, val) = standardized(fixtures::separable_set(4, 1), fixtures::separable_set(1, 2));
    let mut chance = 0.0;
    for seed in 0..10 {
        let m = init_model(&h, &val[0].schema(), seed).map_err(|e| e.to_string())?;
        chance += gnn::evaluate(&m, &val, LossKind::Bce).map_err(|e| e.to_string())?.1 / 10.0;
    }
    ensure((chance - 0.04).abs() <= 0.04, || format!("untrained accuracy {chance}"))?;
    let opts = TrainOptions { epochs: 300, patience: Some(40), seed: 5, ..Default::default() };
    let run = gnn::train(&train, &val, &h, &opts).map_err(|e| e.to_string())?;
    let acc = gnn::evaluate(&run.model, &val, LossKind::Bce).map_err(|e| e.to_string())?.1;
    ensure(acc >= 0.8, || format!("held-out accuracy {acc}"))?;
    let losses: Vec<f64> = run.history.iter().take(10).map(|e| e.train_loss).collect();
    ensure(losses.windows(2).all(|w| w[1] < w[0]), || format!("training loss not strictly decreasing: {losses:?}"))?;
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("untrained {chance:.3}, trained {acc:.2} (best epoch {})", run.best_epoch))
}

// 6. desk-scale benchmark

fn desk_scale_config(out: &Path) -> RunConfig {
    RunConfig {
        seed: 7,
        paths: Paths { out: out.to_path_buf(), ..Default::default() },
        simulation: SimulationSection {
            num_nanodevices: 16,
            sim_time: 200.0,
            report_success_prob: 0.75,
            events_per_region: 2,
            ..Default::default()
        },
        designs: vec![GraphDesign::Baseline, GraphDesign::C],
        training: TrainingSection {
            hyper: Hyperparams {
                hidden_channels: 32,
                hgt_heads: 2,
                gat_heads: 1,
                hgt_layers: 2,
                first_layers: 0,
                last_layers: 0,
                conv_type: ConvType::Gcn,
                learning_rate: 3e-3,
                weight_decay: 1e-4,
                max_grad_norm: 5.0,
            },
            epochs: 300,
            patience: Some(60),
            train_events: 1,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn criterion_benchmark() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ctx = Context::new(desk_scale_config(dir.path()), None).map_err(|e| e.to_string())?;
    let comparisons = pipeline::run(&ctx).map_err(|e| e.to_string())?;
    let c = comparisons.iter().find(|c| c.design == GraphDesign::C).ok_or("no comparison for design c")?;
    ensure(c.rows.len() == 9, || format!("{} profiles in the comparison", c.rows.len()))?;
    println!("    profile      baseline  design c");
    for r in &c.rows {
        println!("    {:<12} {:>8.3} {:>9.3}", r.profile, r.baseline_accuracy, r.design_accuracy);
    }
    let at_least = c.rows.iter().filter(|r| r.design_at_least_baseline()).count();
    println!("    design c >= baseline on {at_least} of 9 profiles");
    let original = c.rows.iter().find(|r| r.profile == "original").ok_or("no original row")?;
    let eval_file = dir.path().join("eval/c_original.json");
    let e: pipeline::Evaluation = flowloc::io::read_json(&eval_file).map_err(|e| e.to_string())?;
    ensure(e.predictions.len() == 25, || format!("{} held-out predictions", e.predictions.len()))?;
    ensure(original.design_accuracy >= 0.12, || format!("original-profile accuracy {}", original.design_accuracy))?;
    within_budget(start, Duration::from_secs(20 * 60))?;
    Ok(format!("original-profile accuracy {:.2} (baseline {:.2})", original.design_accuracy, original.baseline_accuracy))
}

// 7. metric identities

fn criterion_metrics() -> Outcome {
    let start = Instant::now();
    let g = fixtures::star_graph(25);
    let labels = g.event_region_ids().to_vec();
    let mut r = rng::stream(77, &[]);
    let pred = |truth: u32, predicted: u32| Prediction {
        dataset: DatasetKey { region_id: truth, event_index: 0 },
        profile: "original".into(),
        design: GraphDesign::C,
        predicted_region: predicted,
        truth_region: truth,
        truth_location: Point3::ORIGIN,
    };
    for trial in 0..200 {
        let n = r.gen_range(1..120);
        let preds: Vec<Prediction> =
            (0..n).map(|_| pred(labels[r.gen_range(0..25)], if r.gen_bool(0.3) { 0 } else { labels[r.gen_range(0..25)] })).collect();
        let preds: Vec<Prediction> = preds.into_iter().map(|p| if p.predicted_region == 0 { pred(p.truth_region, p.truth_region) } else { p }).collect();
        let cm = confusion_matrix(&preds, &labels).map_err(|e| e.to_string())?;
        let acc = region_accuracy(&preds).map_err(|e| e.to_string())?;
        ensure(acc == cm.trace() as f64 / cm.total() as f64, || format!("trial {trial}: accuracy {acc} vs trace/total"))?;
    }
    let centre = fixtures::single_cycle(1.0);
    let id = centre.nodes()[0].id;
    let c = centre.region_centroid(id).map_err(|e| e.to_string())?;
    let err = point_error(&centre, id, &Point3::new(c.x + 3.0, c.y + 4.0, c.z)).map_err(|e| e.to_string())?;
    ensure((err - 5.0).abs() < 1e-12, || format!("3-4-5 gave {err}"))?;
    let perfect: Vec<Prediction> = labels.iter().map(|&l| pred(l, l)).collect();
    let cm = confusion_matrix(&perfect, &labels).map_err(|e| e.to_string())?;
    ensure(cm.is_diagonal() && region_accuracy(&perfect).unwrap() == 1.0, || "perfect predictor".into())?;
    let rep = eval::metrics_report(&g, &perfect, eval::PointEstimate::Centroid).map_err(|e| e.to_string())?;
    ensure(rep.confusion.row_sums().iter().all(|&s| s == 1), || "row sums".into())?;
    within_budget(start, Duration::from_secs(1))?;
    Ok("accuracy = trace/total on 200 random sets; 3-4-5 gives 5 cm; perfect predictor is diagonal".into())
}

// 8. reproducibility

fn flowloc(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_flowloc")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("flowloc {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
}

fn criterion_reproducibility() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let mut cfg = desk_scale_config(&out);
    cfg.simulation.num_nanodevices = 4;
    cfg.simulation.sim_time = 80.0;
    cfg.simulation.probability_walks = 500;
    cfg.profiles = vec!["original".into(), "tall".into(), "active".into()];
    cfg.training.epochs = 3;
    cfg.tune.budget = 2;
    cfg.tune.epochs = Some(2);
    cfg.tune.space.hidden_channels = vec![16];
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, toml::to_string(&cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let cfg_arg = cfg_path.to_str().ok_or("path")?;
    let commands = ["simulate", "probs", "transform", "featurize", "tune", "train", "evaluate", "report"];
    for c in commands {
        flowloc(&[c, "--config", cfg_arg, "--jobs", "1"])?;
    }
    let mut files = 0;
    for c in commands {
        let manifest_path = out.join(format!("manifests/{c}.json"));
        let first: Manifest = flowloc::io::read_json(&manifest_path).map_err(|e| e.to_string())?;
        let before = std::fs::read(&manifest_path).map_err(|e| e.to_string())?;
        flowloc(&[c, "--config", manifest_path.to_str().ok_or("path")?, "--jobs", "3"])?;
        for f in &first.outputs {
            let now = sha256_file(&out.join(&f.path)).map_err(|e| e.to_string())?;
            ensure(now == f.sha256, || format!("{c}: {} changed on rerun", f.path))?;
            files += 1;
        }
        let after = std::fs::read(&manifest_path).map_err(|e| e.to_string())?;
        ensure(before == after, || format!("{c}: manifest changed on rerun"))?;
    }
    Ok(format!("{files} outputs of {} commands bit-identical on rerun from their manifests ({:.1?})", commands.len(), start.elapsed()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("GMM correctness", criterion_gmm),
        ("scaling algebra", criterion_scaling),
        ("Monte-Carlo visit probabilities", criterion_probabilities),
        ("gradient correctness", criterion_gradients),
        ("learning sanity", criterion_learning),
        ("desk-scale benchmark", criterion_benchmark),
        ("metric identities", criterion_metrics),
        ("reproducibility", criterion_reproducibility),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {why} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
