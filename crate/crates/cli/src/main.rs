//! `spexplore`: generate synthetic scenes, run one planner, or evaluate
//! planners over seeded trials.
//!
//! Settings come from built-in defaults, then the `--config` file, then
//! command-line flags (later wins). Every run writes `run_manifest.json`
//! into the output directory; passing that file back as `--config`
//! reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spexplore_core::config::RunConfig;
use spexplore_core::eval::{
    report, run_experiment, sweep, trace_json, write_records_csv, write_report_json, write_traces, SweepAxis,
    TrialContext,
};
use spexplore_core::planners::PlannerKind;
use spexplore_core::scene::{save_scene, SceneConfig};
use spexplore_core::{Error, Result};

#[derive(Parser)]
#[command(name = "spexplore", version, about = "Spatio-spectral exploration planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scene (SSER rasters and scene.json).
    Generate(Common),
    /// Run one planner on one scene and write its path trace.
    Plan(Common),
    /// Run every configured planner over seeded trials, or a sweep.
    Evaluate(EvalArgs),
}

#[derive(Args)]
struct Common {
    /// TOML or JSON configuration, or a previous run_manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the scene and the experiment.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trials.
    #[arg(long)]
    jobs: Option<usize>,
    /// Planner (`plan`), or comma-separated planners (`evaluate`).
    #[arg(long)]
    planner: Option<String>,
    /// Sampling budget in samples, start included.
    #[arg(long)]
    budget: Option<usize>,
    /// MCTS maximum depth.
    #[arg(long)]
    depth: Option<usize>,
    /// MCTS iterations per decision.
    #[arg(long)]
    iterations: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Sweep one axis, e.g. `depth=3,5,7`, `samples=10,20` or
    /// `path_length=100,250`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

fn resolve(common: &Common, command: &str) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    if let Some(j) = common.jobs {
        cfg.experiment.jobs = Some(j);
    }
    if let Some(p) = &common.planner {
        let kinds = p
            .split(',')
            .map(|s| s.trim().parse::<PlannerKind>())
            .collect::<Result<Vec<_>>>()?;
        if command == "plan" {
            if kinds.len() != 1 {
                return Err(Error::ConfigInvalid("plan takes exactly one --planner".into()));
            }
            cfg.experiment.planner = kinds[0];
        } else {
            cfg.experiment.planners = kinds;
        }
    }
    if let Some(b) = common.budget {
        cfg.experiment.budget = Some(b);
        cfg.experiment.path_length = None;
    }
    if let Some(d) = common.depth {
        cfg.mcts.max_depth = d;
    }
    if let Some(i) = common.iterations {
        cfg.mcts.iterations = i;
    }
    Ok(cfg)
}

fn parse_sweep(spec: &str) -> Result<(SweepAxis, Vec<f64>)> {
    let (axis, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::ConfigInvalid(format!("--sweep expects axis=v1,v2,..., got {spec:?}")))?;
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::ConfigInvalid(format!("--sweep value {v:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((axis.trim().parse()?, values))
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let m = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.experiment.seed,
        config: cfg,
    };
    fs::write(out.join("run_manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

fn generate(common: &Common) -> Result<()> {
    let cfg = resolve(common, "generate")?;
    let scene_cfg: &SceneConfig = &cfg.scene.synthetic;
    scene_cfg.validate()?;
    let scene = spexplore_core::scene::generate_synthetic_scene::<f64>(scene_cfg, scene_cfg.seed)?;
    fs::create_dir_all(&common.out)?;
    let files = save_scene(&common.out, &scene, "sser")?;
    write_manifest(&common.out, "generate", &cfg)?;
    for p in [files.orbital, files.insitu, files.metadata] {
        println!("{}", p.display());
    }
    Ok(())
}

fn plan(common: &Common) -> Result<()> {
    let mut cfg = resolve(common, "plan")?;
    cfg.experiment.planners = vec![cfg.experiment.planner];
    cfg.experiment.trials = 1;
    let exp = cfg.experiment()?;
    let scene = exp.scene.build()?;
    let ctx = TrialContext::new(&exp, &scene)?;
    let rec = ctx
        .run_trial(0)?
        .pop()
        .expect("one planner yields one record");
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("trace.json"), trace_json(&rec)?)?;
    write_manifest(&common.out, "plan", &cfg)?;
    let time = rec
        .mean_action_time()
        .map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
    println!(
        "planner={} samples={} final_error={} path_cost={} mean_action_time_s={}",
        rec.planner,
        rec.cells.len(),
        rec.final_error,
        rec.path_cost,
        time
    );
    Ok(())
}

fn evaluate(args: &EvalArgs) -> Result<()> {
    let common = &args.common;
    let mut cfg = resolve(common, "evaluate")?;
    if let Some(s) = &args.sweep {
        let (axis, values) = parse_sweep(s)?;
        cfg.experiment.sweep = Some(spexplore_core::config::SweepSpec { axis, values });
    }
    let exp = cfg.experiment()?;
    let out = &common.out;
    fs::create_dir_all(out)?;
    match &cfg.experiment.sweep {
        None => {
            let records = run_experiment(&exp)?;
            write_records_csv(&out.join("results.csv"), &records)?;
            write_traces(&out.join("traces"), &records)?;
            let rep = report(&records, exp.test, exp.alpha);
            write_report_json(&out.join("report.json"), &rep)?;
            print_report(&rep);
        }
        Some(spec) => {
            let points = sweep(&exp, spec.axis, &spec.values)?;
            for pt in &points {
                let dir = out.join(format!("{}_{}", spec.axis.name(), pt.value));
                fs::create_dir_all(&dir)?;
                write_records_csv(&dir.join("results.csv"), &pt.records)?;
                write_traces(&dir.join("traces"), &pt.records)?;
                write_report_json(&dir.join("report.json"), &pt.report)?;
                if common.verbose {
                    eprintln!("{}", dir.display());
                }
                print_report(&pt.report);
            }
        }
    }
    write_manifest(out, "evaluate", &cfg)?;
    Ok(())
}

fn print_report(rep: &spexplore_core::eval::ComparisonReport) {
    if let Some(l) = &rep.label {
        println!("[{l}]");
    }
    for s in &rep.planners {
        let time = s
            .mean_action_time_s
            .map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
        println!(
            "{:<7} n={:<3} mre={:.6} se={:.6} mean_action_time_s={}",
            s.planner, s.n, s.mre, s.std_error, time
        );
    }
    for c in &rep.comparisons {
        match (c.t, c.p) {
            (Some(t), Some(p)) => println!(
                "{} < {}: t={t:.4} p={p:.4e}{}",
                c.reference,
                c.other,
                if c.significant { " *" } else { "" }
            ),
            _ => println!(
                "{} < {}: {}",
                c.reference,
                c.other,
                c.note.as_deref().unwrap_or("no test")
            ),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Plan(c) => plan(c),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
