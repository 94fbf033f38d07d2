//! Experiment harness: seeded trials over every configured planner, mean
//! reconstruction error, one-tailed significance tests, parameter sweeps and
//! result files.

mod output;
mod stats;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ExplorationAction, GridCell, RewardModel, RewardParams};
use crate::planners::{
    fixed_step_plan, gss_plan, nmpse_run, random_plan, Budget, GssParams, MctsParams, PlannerKind, PlannerOutcome,
};
use crate::rng::RandomStream;
use crate::scene::{generate_synthetic_scene, load_scene, load_scene_dir, LoadConfig, SceneConfig, SceneryPair};
use crate::spectral::{scene_reconstruction_error, SolverOptions};

pub use output::{
    read_records_csv, report_from_csv, report_from_rows, trace_json, write_records_csv, write_report_json,
    write_traces, CsvRow, TraceStep, CSV_HEADER,
};
pub use stats::{mean, one_tailed_pooled_test, one_tailed_test, one_tailed_welch_test, std_error, variance, StatTest, TTest};

/// Where the scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Synthetic(SceneConfig),
    Files {
        orbital: PathBuf,
        insitu: PathBuf,
        load: LoadConfig,
    },
    /// A directory written by `save_scene`.
    Dir(PathBuf),
}

impl SceneSource {
    pub fn build(&self) -> Result<SceneryPair<f64>> {
        match self {
            SceneSource::Synthetic(cfg) => generate_synthetic_scene(cfg, cfg.seed),
            SceneSource::Files { orbital, insitu, load } => load_scene(orbital, insitu, load),
            SceneSource::Dir(dir) => load_scene_dir(dir),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneSource,
    pub planners: Vec<PlannerKind>,
    pub trials: usize,
    pub budget: Budget,
    pub seed: u64,
    pub solver: SolverOptions<f64>,
    pub reward: RewardParams,
    pub mcts: MctsParams,
    pub gss: GssParams,
    /// Cells between fixed-step samples.
    pub fixed_stride: usize,
    /// Fixed start cell; otherwise drawn per trial.
    pub start: Option<GridCell>,
    pub test: StatTest,
    pub alpha: f64,
    /// When off, per-action wall times are not recorded and result files
    /// depend only on the configuration.
    pub record_timing: bool,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: SceneSource::Synthetic(SceneConfig::default()),
            planners: PlannerKind::ALL.to_vec(),
            trials: 50,
            budget: Budget::Samples(25),
            seed: 0,
            solver: SolverOptions::default(),
            reward: RewardParams::default(),
            mcts: MctsParams::default(),
            gss: GssParams::default(),
            fixed_stride: 1,
            start: None,
            test: StatTest::Welch,
            alpha: 0.05,
            record_timing: true,
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("experiment.trials must be at least 1"));
        }
        if self.planners.is_empty() {
            return Err(Error::config("experiment.planners must name at least one planner"));
        }
        let mut seen = self.planners.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.planners.len() {
            return Err(Error::config("experiment.planners lists a planner twice"));
        }
        if self.fixed_stride == 0 {
            return Err(Error::config("experiment.fixed_stride must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("experiment.alpha must lie in (0, 1)"));
        }
        if self.jobs == Some(0) {
            return Err(Error::config("jobs must be at least 1"));
        }
        if self.planners.contains(&PlannerKind::Gss)
            && !self.planners.contains(&PlannerKind::Nmpse)
            && self.gss.path_budget.is_none()
        {
            return Err(Error::config(
                "gss without nmpse needs gss.path_budget (the goal defaults to the start)",
            ));
        }
        self.budget.validate()?;
        self.mcts.validate()?;
        self.gss.validate()
    }
}

/// One planner run within one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub planner: PlannerKind,
    pub budget: f64,
    pub start: GridCell,
    pub cells: Vec<GridCell>,
    pub actions: Vec<Option<ExplorationAction>>,
    pub final_error: f64,
    pub path_cost: f64,
    pub action_times: Vec<f64>,
}

impl TrialRecord {
    pub fn mean_action_time(&self) -> Option<f64> {
        (!self.action_times.is_empty()).then(|| mean(&self.action_times))
    }
}

/// Seed of trial `trial` under experiment seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    RandomStream::from_seed(seed).child_seed(trial as u64)
}

fn planner_tag(kind: PlannerKind) -> u64 {
    100 + kind as u64
}

/// Runs a single planner and scores its library against the orbital image.
pub struct TrialContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub scene: &'a SceneryPair<f64>,
    pub reward: RewardModel<f64>,
    pub waypoints: Vec<GridCell>,
}

impl<'a> TrialContext<'a> {
    pub fn new(cfg: &'a ExperimentConfig, scene: &'a SceneryPair<f64>) -> Result<Self> {
        Ok(TrialContext {
            cfg,
            scene,
            reward: cfg.reward.resolve(&scene.orbital)?,
            waypoints: cfg.gss.waypoints(&scene.grid),
        })
    }

    pub fn start_cell(&self, trial: usize) -> Result<GridCell> {
        match self.cfg.start {
            Some(c) => {
                self.scene.grid.check(c)?;
                Ok(c)
            }
            None => {
                let mut rng = RandomStream::from_seed(trial_seed(self.cfg.seed, trial)).child(0);
                Ok(self.scene.grid.cell_at(rng.index(self.scene.grid.len())))
            }
        }
    }

    /// All planners of one trial, in configuration order. GSS is paired with
    /// the trial's NMPSE run when there is one.
    pub fn run_trial(&self, trial: usize) -> Result<Vec<TrialRecord>> {
        let cfg = self.cfg;
        let seed = trial_seed(cfg.seed, trial);
        let stream = RandomStream::from_seed(seed);
        let start = self.start_cell(trial)?;
        let mut nmpse: Option<PlannerOutcome<f64>> = None;
        let mut out = Vec::with_capacity(cfg.planners.len());
        let mut order = cfg.planners.clone();
        // NMPSE runs first so GSS can take its end cell and path cost.
        order.sort_by_key(|k| *k != PlannerKind::Nmpse);
        for kind in order {
            let mut rng = stream.child(planner_tag(kind));
            let (outcome, budget) = match kind {
                PlannerKind::Nmpse => {
                    let o = nmpse_run(self.scene, start, cfg.budget, self.reward, &cfg.mcts, &mut rng)?;
                    nmpse = Some(o.clone());
                    (o, cfg.budget.value())
                }
                PlannerKind::Gss => {
                    let goal = cfg.gss.goal.or(nmpse.as_ref().map(|o| o.end())).unwrap_or(start);
                    let budget = cfg
                        .gss
                        .path_budget
                        .or(nmpse.as_ref().map(|o| o.path_cost))
                        .ok_or_else(|| Error::config("gss needs a path budget"))?;
                    let o = gss_plan(self.scene, start, goal, budget, &self.waypoints, &self.reward, &mut rng)?;
                    (o, budget)
                }
                PlannerKind::Fixed => (
                    fixed_step_plan(self.scene, start, cfg.budget, cfg.fixed_stride, &mut rng)?,
                    cfg.budget.value(),
                ),
                PlannerKind::Random => (random_plan(self.scene, start, cfg.budget, &mut rng)?, cfg.budget.value()),
            };
            let final_error = scene_reconstruction_error(&outcome.library(), self.scene.orbital.pixels(), &cfg.solver)?;
            out.push(TrialRecord {
                trial,
                seed,
                planner: kind,
                budget,
                start,
                cells: outcome.cells,
                actions: outcome.actions,
                final_error,
                path_cost: outcome.path_cost,
                action_times: if cfg.record_timing { outcome.action_times } else { Vec::new() },
            });
        }
        // Report in configuration order.
        out.sort_by_key(|r| cfg.planners.iter().position(|k| *k == r.planner));
        Ok(out)
    }
}

/// Runs every trial on an already built scene.
pub fn run_experiment_on(cfg: &ExperimentConfig, scene: &SceneryPair<f64>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let ctx = TrialContext::new(cfg, scene)?;
    let run = || -> Vec<Result<Vec<TrialRecord>>> {
        (0..cfg.trials).into_par_iter().map(|t| ctx.run_trial(t)).collect()
    };
    let results = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut records = Vec::with_capacity(cfg.trials * cfg.planners.len());
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(rs) => records.extend(rs),
            Err(e) => {
                return Err(Error::TrialFailed {
                    trial,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(records)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let scene = cfg.scene.build()?;
    run_experiment_on(cfg, &scene)
}

/// Mean final error over the planner's trials.
pub fn mean_reconstruction_error(records: &[TrialRecord], planner: PlannerKind) -> Option<f64> {
    let errs: Vec<f64> = records.iter().filter(|r| r.planner == planner).map(|r| r.final_error).collect();
    (!errs.is_empty()).then(|| mean(&errs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSummary {
    pub planner: String,
    pub n: usize,
    /// Mean reconstruction error.
    pub mre: f64,
    pub std_error: f64,
    pub mean_action_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    /// The planner hypothesised to have the lower error.
    pub reference: String,
    pub other: String,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub df: Option<f64>,
    pub significant: bool,
    /// Why no test could be computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub test: StatTest,
    pub alpha: f64,
    pub planners: Vec<PlannerSummary>,
    pub comparisons: Vec<PairwiseTest>,
}

impl ComparisonReport {
    pub fn summary(&self, planner: &str) -> Option<&PlannerSummary> {
        self.planners.iter().find(|s| s.planner == planner)
    }

    pub fn comparison(&self, other: &str) -> Option<&PairwiseTest> {
        self.comparisons.iter().find(|c| c.other == other)
    }
}

/// Summaries per planner and one-tailed tests of the reference planner
/// (NMPSE when present, otherwise the first) against each other planner.
pub fn report(records: &[TrialRecord], test: StatTest, alpha: f64) -> ComparisonReport {
    report_from_rows(&records.iter().map(CsvRow::from).collect::<Vec<_>>(), test, alpha)
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Depth,
    Samples,
    PathLength,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(SweepAxis::Depth),
            "samples" => Ok(SweepAxis::Samples),
            "path_length" => Ok(SweepAxis::PathLength),
            _ => Err(Error::config(format!("unknown sweep axis {s:?} (expected depth, samples or path_length)"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Depth => "depth",
            SweepAxis::Samples => "samples",
            SweepAxis::PathLength => "path_length",
        }
    }

    /// The configuration with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let whole = |what: &str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!("{what} sweep values must be positive integers, got {value}")))
            }
        };
        let mut c = cfg.clone();
        match self {
            SweepAxis::Depth => c.mcts.max_depth = whole("depth")?,
            SweepAxis::Samples => c.budget = Budget::Samples(whole("samples")?),
            SweepAxis::PathLength => {
                if !(value >= 0.0) {
                    return Err(Error::config("path_length sweep values must be >= 0"));
                }
                c.budget = Budget::PathCost(value)
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub records: Vec<TrialRecord>,
    pub report: ComparisonReport,
}

/// Reruns the experiment once per axis value with everything else fixed.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let scene = cfg.scene.build()?;
    values
        .iter()
        .map(|&value| {
            let c = axis.apply(cfg, value)?;
            let records = run_experiment_on(&c, &scene)?;
            let mut report = report(&records, c.test, c.alpha);
            report.label = Some(format!("{}={value}", axis.name()));
            Ok(SweepPoint { value, records, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(planners: Vec<PlannerKind>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            scene: SceneSource::Synthetic(SceneConfig {
                k: 3,
                bands: 6,
                highres_w: 32,
                highres_h: 32,
                patch_size: 8,
                blur_radius: 2,
                ..SceneConfig::default()
            }),
            planners,
            trials,
            budget: Budget::Samples(5),
            mcts: MctsParams {
                iterations: 30,
                max_depth: 3,
                ..MctsParams::default()
            },
            record_timing: false,
            jobs: Some(2),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_fixed_trial_matches_manual_pipeline() {
        let cfg = small(vec![PlannerKind::Fixed], 1);
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 1);
        let scene = cfg.scene.build().unwrap();
        let ctx = TrialContext::new(&cfg, &scene).unwrap();
        let start = ctx.start_cell(0).unwrap();
        let mut rng = RandomStream::from_seed(trial_seed(cfg.seed, 0)).child(planner_tag(PlannerKind::Fixed));
        let out = fixed_step_plan(&scene, start, Budget::Samples(5), 1, &mut rng).unwrap();
        let err = scene_reconstruction_error(&out.library(), scene.orbital.pixels(), &cfg.solver).unwrap();
        assert_eq!(recs[0].cells, out.cells);
        assert_eq!(recs[0].final_error, err);
        assert_eq!(mean_reconstruction_error(&recs, PlannerKind::Fixed), Some(err));
    }

    #[test]
    fn experiments_are_deterministic_and_fair() {
        let cfg = small(PlannerKind::ALL.to_vec(), 3);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&ExperimentConfig { jobs: Some(1), ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        for t in 0..3 {
            let rs: Vec<_> = a.iter().filter(|r| r.trial == t).collect();
            assert!(rs.iter().all(|r| r.start == rs[0].start));
            let n = rs.iter().find(|r| r.planner == PlannerKind::Nmpse).unwrap();
            let g = rs.iter().find(|r| r.planner == PlannerKind::Gss).unwrap();
            assert_eq!(n.budget, 5.0);
            assert_eq!(g.budget, n.path_cost);
            assert!(g.path_cost <= n.path_cost);
        }
    }

    #[test]
    fn single_endmember_scene_has_zero_error() {
        let mut cfg = small(PlannerKind::ALL.to_vec(), 2);
        if let SceneSource::Synthetic(s) = &mut cfg.scene {
            s.k = 1;
            s.noise_sigma = 0.0;
        }
        for r in run_experiment(&cfg).unwrap() {
            assert!(r.final_error < 1e-9, "{} error {}", r.planner, r.final_error);
        }
    }

    #[test]
    fn mean_of_two() {
        let mut recs = run_experiment(&small(vec![PlannerKind::Random], 2)).unwrap();
        recs[0].final_error = 2.0;
        recs[1].final_error = 4.0;
        assert_eq!(mean_reconstruction_error(&recs, PlannerKind::Random), Some(3.0));
        assert_eq!(mean_reconstruction_error(&recs, PlannerKind::Gss), None);
    }

    #[test]
    fn singleton_sweep_equals_plain_run() {
        let cfg = small(vec![PlannerKind::Fixed, PlannerKind::Random], 2);
        let pts = sweep(&cfg, SweepAxis::Samples, &[5.0]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].records, run_experiment(&cfg).unwrap());
        assert!(SweepAxis::Depth.apply(&cfg, 2.5).is_err());
    }

    #[test]
    fn report_tests_reference_against_others() {
        let recs = run_experiment(&small(PlannerKind::ALL.to_vec(), 3)).unwrap();
        let rep = report(&recs, StatTest::Welch, 0.05);
        assert_eq!(rep.planners.len(), 4);
        assert_eq!(rep.comparisons.len(), 3);
        assert!(rep.comparisons.iter().all(|c| c.reference == "nmpse"));
        for c in &rep.comparisons {
            if let Some(p) = c.p {
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small(vec![PlannerKind::Gss], 1);
        assert!(cfg.validate().is_err());
        cfg.gss.path_budget = Some(40.0);
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn failing_trial_is_reported() {
        let mut cfg = small(vec![PlannerKind::Fixed], 3);
        cfg.start = Some(GridCell::new(100, 100));
        match run_experiment(&cfg).unwrap_err() {
            Error::TrialFailed { trial, source } => {
                assert_eq!(trial, 0);
                assert!(matches!(*source, Error::OutOfBounds { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
