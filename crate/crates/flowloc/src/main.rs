use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowloc::pipeline::{self, Context};
use flowloc::{CliError, Overrides, RunConfig};
use flowloc_core::features::GraphDesign;

/// Flow-guided nanodevice localization: simulate, rescale, featurize, train
/// and evaluate.
#[derive(Debug, Parser)]
#[command(name = "flowloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate raw anchor data for every event region.
    Simulate(Common),
    /// Estimate per-region visit probabilities by random walks.
    Probs(Common),
    /// Rescale raw datasets to patient profiles.
    Transform(Common),
    /// Fit anchor features and build the input graphs.
    Featurize(Common),
    /// Train one model per graph design.
    Train(Common),
    /// Grid-search hyperparameters per graph design.
    Tune(Common),
    /// Score trained models on the held-out events.
    Evaluate(Common),
    /// Summary and design-versus-baseline comparison tables.
    Report(Common),
    /// Every stage enabled in the config's `[stages]` table.
    Run(Common),
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted. Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Graph design (baseline, a, b, c); repeatable.
    #[arg(long)]
    design: Vec<GraphDesign>,
    /// Profile name or `all`; repeatable.
    #[arg(long)]
    profile: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn context(&self) -> Result<Context, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            designs: (!self.design.is_empty()).then(|| self.design.clone()),
            profiles: (!self.profile.is_empty()).then(|| self.profile.clone()),
            out: self.out.clone(),
        });
        Context::new(cfg, self.jobs)
    }
}

fn print_comparisons(comparisons: &[pipeline::Comparison]) {
    for c in comparisons {
        println!("{} vs {}", c.baseline, c.design);
        print!("{}", flowloc::report::comparison_text(&c.rows, c.baseline.as_str(), c.design.as_str()));
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::DefaultConfig => {
            print!("{}", toml::to_string(&RunConfig::default()).expect("default config serializes"));
            return Ok(());
        }
        Command::Simulate(c) => ("simulate", c),
        Command::Probs(c) => ("probs", c),
        Command::Transform(c) => ("transform", c),
        Command::Featurize(c) => ("featurize", c),
        Command::Train(c) => ("train", c),
        Command::Tune(c) => ("tune", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Report(c) => ("report", c),
        Command::Run(c) => ("run", c),
    };
    let ctx = common.context()?;
    let manifest = match name {
        "simulate" => pipeline::simulate(&ctx)?,
        "probs" => pipeline::probs(&ctx)?,
        "transform" => pipeline::transform(&ctx)?,
        "featurize" => pipeline::featurize(&ctx)?,
        "train" => pipeline::train(&ctx)?,
        "tune" => pipeline::tune(&ctx)?,
        "evaluate" => pipeline::evaluate(&ctx)?,
        "report" => {
            let (m, comparisons) = pipeline::report(&ctx)?;
            print_comparisons(&comparisons);
            m
        }
        _ => {
            print_comparisons(&pipeline::run(&ctx)?);
            return Ok(());
        }
    };
    eprintln!("{name}: {} files written, manifest {}", manifest.outputs.len(), manifest.config_hash);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
