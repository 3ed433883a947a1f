//! The pipeline stages behind each subcommand.
//!
//! Every stage reads what earlier stages wrote under the output directory and
//! finishes by writing `manifests/<stage>.json`. Work inside a stage runs on a
//! pool of `jobs` threads; results are collected in input order, so outputs
//! do not depend on the pool size.

use std::collections::BTreeMap;

use flowloc_core::eval::{self, MetricsReport, Prediction};
use flowloc_core::features::{self, build_input_graph, GraphDesign, InputGraph, Standardization};
use flowloc_core::gnn::{self, grid_candidates, rank_leaderboard, Hyperparams, LeaderboardEntry, TrainOptions};
use flowloc_core::mobility_sim::{self, VisitProbabilities};
use flowloc_core::profile_transform::{self, Profile, ProfileSet};
use flowloc_core::rng::derive_seed;
use flowloc_core::vasculature::VascularGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{self, Checkpoint, FeatureFile, GraphFile, Layout, CHECKPOINT_SCHEMA_VERSION, INPUT_GRAPH_SCHEMA_VERSION};
use crate::manifest::{sha256_hex, Manifest};
use crate::report;

const PROBS_STREAM: u64 = 0x9b0b;
const SPLIT_STREAM: u64 = 0x5b17;
const TRAIN_STREAM: u64 = 0x7a11;
const TUNE_STREAM: u64 = 0x70e;

/// Loaded inputs shared by every stage.
#[derive(Debug)]
pub struct Context {
    pub cfg: RunConfig,
    pub layout: Layout,
    pub graph: VascularGraph,
    pub profiles: ProfileSet,
    data: BTreeMap<String, String>,
    pool: rayon::ThreadPool,
}

/// What a stage read and wrote, relative to the output directory.
#[derive(Debug, Default)]
pub struct StageFiles {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
}

impl Context {
    /// `jobs = None` uses every available core.
    pub fn new(cfg: RunConfig, jobs: Option<usize>) -> Result<Self> {
        cfg.validate()?;
        let vasc_text = match &cfg.paths.vasculature {
            Some(p) => io::read_text(p)?,
            None => io::REFERENCE_VASCULATURE.to_string(),
        };
        let prof_text = match &cfg.paths.profiles {
            Some(p) => io::read_text(p)?,
            None => io::REFERENCE_PROFILES.to_string(),
        };
        let graph = io::parse_vasculature(&vasc_text, "vasculature")?;
        let profiles = io::parse_profiles(&prof_text, "profiles")?;
        cfg.selected_profiles(&profiles)?;
        let data = BTreeMap::from([
            ("vasculature".to_string(), sha256_hex(vasc_text.as_bytes())),
            ("profiles".to_string(), sha256_hex(prof_text.as_bytes())),
        ]);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            if n == 0 {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        let layout = Layout::new(cfg.paths.out.clone());
        Ok(Self { cfg, layout, graph, profiles, data, pool })
    }

    pub fn selected_profiles(&self) -> Vec<String> {
        self.cfg.selected_profiles(&self.profiles).expect("checked in Context::new")
    }

    fn profile(&self, name: &str) -> Result<&Profile> {
        Ok(self.profiles.get(name)?)
    }

    fn finish(&self, command: &str, files: StageFiles) -> Result<Manifest> {
        let m = Manifest::new(command, &self.cfg, files.seeds, self.data.clone(), &self.layout.root, &files.inputs, &files.outputs)?;
        io::write_json(&self.layout.abs(&Layout::manifest(command)), &m)?;
        Ok(m)
    }

    fn write_json<T: Serialize>(&self, rel: &str, v: &T) -> Result<String> {
        io::write_json(&self.layout.abs(rel), v)?;
        Ok(rel.to_string())
    }

    fn write_text(&self, rel: &str, text: &str) -> Result<String> {
        io::write_bytes(&self.layout.abs(rel), text.as_bytes())?;
        Ok(rel.to_string())
    }

    fn probs_seed(&self) -> u64 {
        derive_seed(self.cfg.seed, &[PROBS_STREAM])
    }

    fn split_seed(&self) -> u64 {
        derive_seed(self.cfg.seed, &[SPLIT_STREAM])
    }

    fn train_seed(&self, d: GraphDesign) -> u64 {
        derive_seed(self.cfg.seed, &[TRAIN_STREAM, d as u64])
    }

    fn tune_seed(&self, d: GraphDesign) -> u64 {
        derive_seed(self.cfg.seed, &[TUNE_STREAM, d as u64])
    }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn simulate(ctx: &Context) -> Result<Manifest> {
    let sim = ctx.cfg.simulation.to_core(ctx.cfg.seed);
    let jobs = mobility_sim::benchmark_plan(&ctx.graph, &sim, ctx.cfg.simulation.events_per_region)?;
    let outputs = collect(ctx.pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let d = mobility_sim::simulate_keyed(&ctx.graph, &job.config, &job.event, job.key)?;
                let rel = Layout::raw(&job.key);
                io::write_dataset(&ctx.layout.abs(&rel), &d)?;
                Ok(rel)
            })
            .collect()
    }))?;
    let seeds = BTreeMap::from([("simulation".to_string(), ctx.cfg.seed)]);
    ctx.finish("simulate", StageFiles { inputs: vec![], outputs, seeds })
}

pub fn probs(ctx: &Context) -> Result<Manifest> {
    let seed = ctx.probs_seed();
    let p = mobility_sim::estimate_visit_probabilities(&ctx.graph, ctx.cfg.simulation.probability_walks, seed)?;
    let out = ctx.write_json(&Layout::probs(), &p)?;
    let seeds = BTreeMap::from([("probabilities".to_string(), seed)]);
    ctx.finish("probs", StageFiles { inputs: vec![], outputs: vec![out], seeds })
}

fn raw_files(ctx: &Context) -> Result<Vec<String>> {
    let files = ctx.layout.list("raw", "jsonl")?;
    if files.is_empty() {
        return Err(CliError::Data(format!("no raw datasets under {}; run `flowloc simulate` first", ctx.layout.abs("raw").display())));
    }
    Ok(files)
}

pub fn transform(ctx: &Context) -> Result<Manifest> {
    let inputs = raw_files(ctx)?;
    let profiles = ctx.selected_profiles();
    let work: Vec<(&String, &String)> = profiles.iter().flat_map(|p| inputs.iter().map(move |f| (p, f))).collect();
    let outputs = collect(ctx.pool.install(|| {
        work.par_iter()
            .map(|&(profile, file)| {
                let raw = io::read_dataset(&ctx.layout.abs(file))?;
                let mut out = profile_transform::transform_dataset(&raw, &ctx.graph, ctx.profile(profile)?)?;
                // later stages only read circulation times
                for r in &mut out.records {
                    r.raw_positions = None;
                }
                out.config.retain_positions = false;
                let rel = Layout::transformed(profile, &out.key);
                io::write_dataset(&ctx.layout.abs(&rel), &out)?;
                Ok(rel)
            })
            .collect()
    }))?;
    ctx.finish("transform", StageFiles { inputs, outputs, seeds: BTreeMap::new() })
}

fn load_probs(ctx: &Context, designs: &[GraphDesign]) -> Result<Option<VisitProbabilities>> {
    let needed: Vec<String> = designs.iter().filter(|d| d.has_probability_edges()).map(|d| d.to_string()).collect();
    if needed.is_empty() {
        return Ok(None);
    }
    let path = ctx.layout.abs(&Layout::probs());
    if !path.is_file() {
        return Err(CliError::Data(format!(
            "design {} needs visit probabilities but {} is missing; run `flowloc probs` first",
            needed.join(", "),
            path.display()
        )));
    }
    Ok(Some(io::read_json(&path)?))
}

/// Anchor features for every transformed dataset, plus one input graph per
/// configured design. Region features come from the reference vasculature;
/// the profile reaches the model through the anchor and master nodes.
pub fn featurize(ctx: &Context) -> Result<Manifest> {
    let designs = ctx.cfg.designs.clone();
    let probs = load_probs(ctx, &designs)?;
    let mut inputs = Vec::new();
    for p in ctx.selected_profiles() {
        let files = ctx.layout.list(&format!("transformed/{p}"), "jsonl")?;
        if files.is_empty() {
            return Err(CliError::Data(format!("no transformed datasets for profile {p}; run `flowloc transform` first")));
        }
        inputs.extend(files);
    }
    if probs.is_some() {
        inputs.push(Layout::probs());
    }
    let em = ctx.cfg.features.em;
    let opts = ctx.cfg.features.build_options();
    let outputs = collect(ctx.pool.install(|| {
        inputs
            .par_iter()
            .filter(|f| f.ends_with(".jsonl"))
            .map(|file| {
                let raw = io::read_dataset(&ctx.layout.abs(file))?;
                let profile = ctx.profile(&raw.profile)?;
                let feats = features::anchor_features_with(&raw, &em);
                let mut written = vec![ctx.write_json(
                    &Layout::features(&raw.profile, &raw.key),
                    &FeatureFile { key: raw.key, profile: raw.profile.clone(), event: raw.event, features: feats },
                )?];
                for &d in &designs {
                    let mut graph = build_input_graph(&ctx.graph, &feats, profile, d, probs.as_ref(), opts)?;
                    graph.truth_region = Some(raw.key.region_id);
                    let gf = GraphFile {
                        schema_version: INPUT_GRAPH_SCHEMA_VERSION,
                        key: raw.key,
                        profile: raw.profile.clone(),
                        event: raw.event,
                        standardization: None,
                        graph,
                    };
                    written.push(ctx.write_json(&Layout::graph(d, &raw.profile, &raw.key), &gf)?);
                }
                Ok(written)
            })
            .collect()
    }))?;
    let outputs = outputs.into_iter().flatten().collect();
    ctx.finish("featurize", StageFiles { inputs, outputs, seeds: BTreeMap::new() })
}

/// Input graphs of `design` for the selected profiles, in (profile, dataset) order.
fn load_graphs(ctx: &Context, design: GraphDesign) -> Result<(Vec<String>, Vec<GraphFile>)> {
    let mut files = Vec::new();
    for p in ctx.selected_profiles() {
        let found = ctx.layout.list(&format!("graphs/{design}/{p}"), "json")?;
        if found.is_empty() {
            let hint = if design.has_probability_edges() && !ctx.layout.abs(&Layout::probs()).is_file() {
                "; it needs visit probabilities, run `flowloc probs` and then `flowloc featurize`"
            } else {
                "; run `flowloc featurize` first"
            };
            return Err(CliError::Data(format!("no input graphs for design {design}, profile {p}{hint}")));
        }
        files.extend(found);
    }
    let graphs = collect(ctx.pool.install(|| files.par_iter().map(|f| io::read_json::<GraphFile>(&ctx.layout.abs(f))).collect()))?;
    for (f, g) in files.iter().zip(&graphs) {
        if g.schema_version != INPUT_GRAPH_SCHEMA_VERSION || g.graph.design != design {
            return Err(CliError::Data(format!("{f}: not a version {INPUT_GRAPH_SCHEMA_VERSION} graph of design {design}")));
        }
    }
    Ok((files, graphs))
}

/// Training and validation graphs (standardized when configured) plus the
/// statistics used.
struct TrainingData {
    inputs: Vec<String>,
    train: Vec<InputGraph>,
    val: Vec<InputGraph>,
    standardization: Option<Standardization>,
}

fn training_data(ctx: &Context, design: GraphDesign) -> Result<TrainingData> {
    let (files, graphs) = load_graphs(ctx, design)?;
    let (inputs, pool): (Vec<String>, Vec<InputGraph>) = files
        .into_iter()
        .zip(graphs)
        .filter(|(_, g)| g.key.event_index < ctx.cfg.training.train_events)
        .map(|(f, g)| (f, g.graph))
        .unzip();
    if pool.is_empty() {
        return Err(CliError::Data(format!("no training graphs for design {design}")));
    }
    let labels: Vec<u32> = pool.iter().map(|g| g.truth_region.unwrap_or(0)).collect();
    let (tr, va) = gnn::stratified_split(&labels, ctx.cfg.training.val_fraction, ctx.split_seed());
    let mut train: Vec<InputGraph> = tr.iter().map(|&i| pool[i].clone()).collect();
    let mut val: Vec<InputGraph> = va.iter().map(|&i| pool[i].clone()).collect();
    if val.is_empty() {
        return Err(CliError::Data("validation split is empty; add events or profiles".into()));
    }
    let standardization = if ctx.cfg.features.standardize {
        let st = Standardization::fit(&train)?;
        for g in train.iter_mut().chain(val.iter_mut()) {
            st.apply(g)?;
        }
        Some(st)
    } else {
        None
    };
    Ok(TrainingData { inputs, train, val, standardization })
}

fn numeric(e: flowloc_core::Error) -> CliError {
    match e {
        flowloc_core::Error::Diverged { .. } | flowloc_core::Error::NonFinite { .. } => CliError::Numeric(e.to_string()),
        other => CliError::Core(other),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub design: GraphDesign,
    pub seed: u64,
    pub entries: Vec<LeaderboardEntry>,
}

pub fn tune(ctx: &Context) -> Result<Manifest> {
    let mut files = StageFiles::default();
    for &design in &ctx.cfg.designs {
        let data = training_data(ctx, design)?;
        let seed = ctx.tune_seed(design);
        let candidates = grid_candidates(&ctx.cfg.tune.space, ctx.cfg.tune.budget, seed)?;
        let opts = TrainOptions {
            epochs: ctx.cfg.tune.epochs.unwrap_or(ctx.cfg.training.epochs),
            patience: ctx.cfg.training.patience,
            seed,
            loss: ctx.cfg.training.loss,
            space: ctx.cfg.tune.space.clone(),
        };
        let runs = collect(ctx.pool.install(|| {
            candidates
                .par_iter()
                .map(|h| {
                    let run = gnn::train(&data.train, &data.val, h, &opts).map_err(numeric)?;
                    Ok(LeaderboardEntry {
                        rank: 0,
                        hyper: *h,
                        best_val_accuracy: run.best_val_accuracy,
                        best_val_loss: run.best_val_loss,
                        best_epoch: run.best_epoch,
                    })
                })
                .collect()
        }))?;
        let mut entries = runs;
        rank_leaderboard(&mut entries);
        files.outputs.push(ctx.write_text(&Layout::leaderboard(design, "tsv"), &io::leaderboard_tsv(&entries))?);
        files.outputs.push(ctx.write_json(&Layout::leaderboard(design, "json"), &Leaderboard { design, seed, entries })?);
        files.inputs.extend(data.inputs);
        files.seeds.insert(format!("tune.{design}"), seed);
    }
    files.seeds.insert("split".into(), ctx.split_seed());
    ctx.finish("tune", files)
}

fn hyper_for(ctx: &Context, design: GraphDesign, files: &mut StageFiles) -> Result<Hyperparams> {
    if !ctx.cfg.training.use_tuned {
        return Ok(ctx.cfg.training.hyper);
    }
    let rel = Layout::leaderboard(design, "json");
    let board: Leaderboard = io::read_json(&ctx.layout.abs(&rel))
        .map_err(|e| CliError::Data(format!("{e}; run `flowloc tune` first or set training.use_tuned = false")))?;
    files.inputs.push(rel);
    board.entries.first().map(|e| e.hyper).ok_or_else(|| CliError::Data(format!("empty leaderboard for design {design}")))
}

pub fn train(ctx: &Context) -> Result<Manifest> {
    let mut files = StageFiles::default();
    let mut jobs = Vec::new();
    for &design in &ctx.cfg.designs {
        if design.has_probability_edges() && !ctx.layout.abs(&Layout::probs()).is_file() {
            return Err(CliError::Data(format!(
                "design {design} needs the visit-probabilities file {}; run `flowloc probs` first",
                ctx.layout.abs(&Layout::probs()).display()
            )));
        }
        let h = hyper_for(ctx, design, &mut files)?;
        let data = training_data(ctx, design)?;
        jobs.push((design, h, data));
    }
    let results = collect(ctx.pool.install(|| {
        jobs.par_iter()
            .map(|(design, h, data)| {
                let seed = ctx.train_seed(*design);
                let opts = TrainOptions {
                    epochs: ctx.cfg.training.epochs,
                    patience: ctx.cfg.training.patience,
                    seed,
                    loss: ctx.cfg.training.loss,
                    ..Default::default()
                };
                let run = gnn::train(&data.train, &data.val, h, &opts).map_err(numeric)?;
                let ck = Checkpoint {
                    schema_version: CHECKPOINT_SCHEMA_VERSION,
                    design: *design,
                    train_seed: seed,
                    profiles: ctx.selected_profiles(),
                    best_epoch: run.best_epoch,
                    best_val_accuracy: run.best_val_accuracy,
                    best_val_loss: run.best_val_loss,
                    standardization: data.standardization.clone(),
                    model: run.model,
                };
                let a = ctx.write_json(&Layout::checkpoint(*design), &ck)?;
                let b = ctx.write_text(&Layout::history(*design), &io::history_tsv(&run.history))?;
                Ok((seed, [a, b]))
            })
            .collect()
    }))?;
    for ((design, _, data), (seed, outs)) in jobs.into_iter().zip(results) {
        files.inputs.extend(data.inputs);
        files.outputs.extend(outs);
        files.seeds.insert(format!("train.{design}"), seed);
    }
    files.seeds.insert("split".into(), ctx.split_seed());
    ctx.finish("train", files)
}

/// Evaluation of one (design, profile) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub predictions: Vec<Prediction>,
}

pub fn load_checkpoint(ctx: &Context, design: GraphDesign) -> Result<Checkpoint> {
    let path = ctx.layout.abs(&Layout::checkpoint(design));
    if !path.is_file() {
        return Err(CliError::Data(format!("no checkpoint for design {design} at {}; run `flowloc train` first", path.display())));
    }
    let ck: Checkpoint = io::read_json(&path)?;
    if ck.schema_version != CHECKPOINT_SCHEMA_VERSION || ck.design != design {
        return Err(CliError::Data(format!("{}: not a version {CHECKPOINT_SCHEMA_VERSION} checkpoint of design {design}", path.display())));
    }
    Ok(ck)
}

pub fn evaluate(ctx: &Context) -> Result<Manifest> {
    let mut files = StageFiles::default();
    let estimate = ctx.cfg.evaluate.point_estimate;
    let names = report::region_names(&ctx.graph);
    for &design in &ctx.cfg.designs {
        let ck = load_checkpoint(ctx, design)?;
        files.inputs.push(Layout::checkpoint(design));
        let (gfiles, graphs) = load_graphs(ctx, design)?;
        let held_out: Vec<(String, GraphFile)> =
            gfiles.into_iter().zip(graphs).filter(|(_, g)| g.key.event_index >= ctx.cfg.training.train_events).collect();
        if held_out.is_empty() {
            return Err(CliError::Data(format!(
                "no held-out events: every event index is below training.train_events = {}",
                ctx.cfg.training.train_events
            )));
        }
        let preds = collect(ctx.pool.install(|| {
            held_out
                .par_iter()
                .map(|(_, gf)| {
                    let mut g = gf.graph.clone();
                    if let Some(st) = &ck.standardization {
                        st.apply(&mut g)?;
                    }
                    let predicted_region = eval::predict(&ck.model, &g).map_err(numeric)?;
                    Ok(Prediction {
                        dataset: gf.key,
                        profile: gf.profile.clone(),
                        design,
                        predicted_region,
                        truth_region: gf.key.region_id,
                        truth_location: gf.event.location,
                    })
                })
                .collect()
        }))?;
        files.inputs.extend(held_out.into_iter().map(|(f, _)| f));
        for profile in ctx.selected_profiles() {
            let cell: Vec<Prediction> = preds.iter().filter(|p| p.profile == profile).cloned().collect();
            let scaled = profile_transform::scale_graph(&ctx.graph, ctx.profile(&profile)?)?;
            let rep = eval::metrics_report(&scaled, &cell, estimate)?;
            files.outputs.extend(write_cell_reports(ctx, &rep, &cell, &names)?);
            files.outputs.push(ctx.write_json(&Layout::evaluation(design, &profile), &Evaluation { report: rep, predictions: cell })?);
        }
    }
    ctx.finish("evaluate", files)
}

fn write_cell_reports(
    ctx: &Context,
    rep: &MetricsReport,
    preds: &[Prediction],
    names: &BTreeMap<u32, String>,
) -> Result<Vec<String>> {
    let (d, p) = (rep.design, rep.profile.as_str());
    let title = format!("design {d}, profile {p}");
    Ok(vec![
        ctx.write_text(&Layout::report(d, p, "accuracy", "tsv"), &report::accuracy_tsv(rep))?,
        ctx.write_text(&Layout::report(d, p, "predictions", "tsv"), &report::predictions_tsv(preds))?,
        ctx.write_text(&Layout::report(d, p, "point_error", "tsv"), &report::point_error_tsv(rep, names))?,
        ctx.write_text(&Layout::report(d, p, "point_error", "svg"), &report::box_plot_svg(&title, &rep.per_region, names))?,
        ctx.write_text(&Layout::report(d, p, "confusion", "tsv"), &report::confusion_tsv(&rep.confusion, names))?,
        ctx.write_text(&Layout::report(d, p, "confusion", "svg"), &report::confusion_svg(&title, &rep.confusion, names))?,
    ])
}

/// Comparison tables of every non-baseline design against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: GraphDesign,
    pub design: GraphDesign,
    pub rows: Vec<eval::ComparisonRow>,
}

pub fn report(ctx: &Context) -> Result<(Manifest, Vec<Comparison>)> {
    let mut files = StageFiles::default();
    let mut reports = Vec::new();
    for &design in &ctx.cfg.designs {
        for profile in ctx.selected_profiles() {
            let rel = Layout::evaluation(design, &profile);
            let e: Evaluation = io::read_json(&ctx.layout.abs(&rel))
                .map_err(|e| CliError::Data(format!("{e}; run `flowloc evaluate` first")))?;
            files.inputs.push(rel);
            reports.push(e.report);
        }
    }
    let mut summary = String::from("design\tprofile\tpredictions\tregion_accuracy\tmedian_point_error_cm\n");
    for r in &reports {
        summary += &format!("{}\t{}\t{}\t{}\t{}\n", r.design, r.profile, r.predictions, r.region_accuracy, r.overall.median);
    }
    // pooled over the selected profiles
    for &design in &ctx.cfg.designs {
        let cells: Vec<&eval::MetricsReport> = reports.iter().filter(|r| r.design == design).collect();
        let correct: u64 = cells.iter().map(|r| r.confusion.trace()).sum();
        let total: u64 = cells.iter().map(|r| r.confusion.total()).sum();
        let errors: Vec<f64> = cells.iter().flat_map(|r| r.point_errors.iter().map(|s| s.error)).collect();
        let median = eval::box_stats(&errors).map_or(f64::NAN, |b| b.median);
        summary += &format!("{design}\tall\t{total}\t{}\t{median}\n", correct as f64 / total as f64);
    }
    files.outputs.push(ctx.write_text("reports/summary.tsv", &summary)?);
    let mut comparisons = Vec::new();
    if ctx.cfg.designs.contains(&GraphDesign::Baseline) {
        for &design in ctx.cfg.designs.iter().filter(|&&d| d != GraphDesign::Baseline) {
            let rows = eval::compare(&reports, GraphDesign::Baseline, design);
            let (b, d) = ("baseline", design.as_str());
            files.outputs.push(ctx.write_text(&format!("reports/comparison_{b}_vs_{d}.tsv"), &report::comparison_tsv(&rows, b, d))?);
            files.outputs.push(ctx.write_text(
                &format!("reports/comparison_{b}_vs_{d}.svg"),
                &report::comparison_svg(&format!("region accuracy, {b} vs {d}"), &rows, b, d),
            )?);
            comparisons.push(Comparison { baseline: GraphDesign::Baseline, design, rows });
        }
    }
    Ok((ctx.finish("report", files)?, comparisons))
}

/// Runs the stages enabled in `[stages]`, in pipeline order.
pub fn run(ctx: &Context) -> Result<Vec<Comparison>> {
    let s = ctx.cfg.stages;
    if s.simulate {
        simulate(ctx)?;
    }
    if s.probs {
        probs(ctx)?;
    }
    if s.transform {
        transform(ctx)?;
    }
    if s.featurize {
        featurize(ctx)?;
    }
    if s.tune {
        tune(ctx)?;
    }
    if s.train {
        train(ctx)?;
    }
    if s.evaluate {
        evaluate(ctx)?;
    }
    if s.report {
        return Ok(report(ctx)?.1);
    }
    Ok(Vec::new())
}
