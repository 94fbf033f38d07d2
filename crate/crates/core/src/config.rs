//! Run configuration files.
//!
//! One file holds the sections `[scene]`, `[solver]`, `[reward]`, `[mcts]`,
//! `[gss]` and `[experiment]`; every key is optional. TOML is the primary
//! format. A JSON file with the same structure is accepted too, as is a run
//! manifest whose `config` member holds it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ExperimentConfig, SceneSource, StatTest, SweepAxis};
use crate::mdp::{GridCell, RewardParams};
use crate::planners::{Budget, GssParams, MctsParams, PlannerKind};
use crate::scene::{LoadConfig, SceneConfig};
use crate::spectral::SolverOptions;

/// Default sampling budget when neither `budget` nor `path_length` is set.
pub const DEFAULT_BUDGET: usize = 25;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneSection,
    pub solver: SolverOptions<f64>,
    pub reward: RewardParams,
    pub mcts: MctsParams,
    pub gss: GssParams,
    pub experiment: ExperimentSection,
}

/// Synthetic scene parameters, or raster paths to load instead.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSection {
    #[serde(flatten)]
    pub synthetic: SceneConfig,
    /// Orbital raster (`.sser` or `.csv`); requires `insitu`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbital: Option<PathBuf>,
    /// High-resolution in-situ raster; requires `orbital`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub insitu: Option<PathBuf>,
    /// Directory written by `generate` (holds `scene.json`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: usize,
    /// Planners compared by `evaluate`.
    pub planners: Vec<PlannerKind>,
    /// Planner run by `plan`.
    pub planner: PlannerKind,
    /// Sampling budget (samples, start included).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    /// Path-cost cap; mutually exclusive with `budget`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length: Option<f64>,
    pub seed: u64,
    pub fixed_stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<GridCell>,
    pub test: StatTest,
    pub alpha: f64,
    pub record_timing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        ExperimentSection {
            trials: e.trials,
            planners: e.planners,
            planner: PlannerKind::Nmpse,
            budget: None,
            path_length: None,
            seed: e.seed,
            fixed_stride: e.fixed_stride,
            start: None,
            test: e.test,
            alpha: e.alpha,
            record_timing: e.record_timing,
            jobs: None,
            sweep: None,
        }
    }
}

#[derive(Deserialize)]
struct Manifest {
    config: RunConfig,
}

fn parse_error(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn json_offset(text: &str, e: &serde_json::Error) -> usize {
    text.split_inclusive('\n').take(e.line().saturating_sub(1)).map(str::len).sum::<usize>()
        + e.column().saturating_sub(1)
}

impl RunConfig {
    /// Reads a TOML or JSON configuration, or a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| parse_error(path, 0, format!("cannot read file: {e}")))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| parse_error(path, json_offset(&text, &e), e.to_string()))?;
            let result = if value.get("config").is_some() {
                serde_json::from_value::<Manifest>(value).map(|m| m.config)
            } else {
                serde_json::from_value::<RunConfig>(value)
            };
            result.map_err(|e| parse_error(path, 0, e.to_string()))
        } else {
            Self::from_toml(&text).map_err(|e| match e {
                Error::Parse { offset, message, .. } => parse_error(path, offset as usize, message),
                other => other,
            })
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::new(),
            offset: e.span().map_or(0, |s| s.start) as u64,
            message: e.message().to_string(),
        })
    }

    /// Applies the same seed to the scene and the experiment.
    pub fn set_seed(&mut self, seed: u64) {
        self.scene.synthetic.seed = seed;
        self.experiment.seed = seed;
    }

    pub fn scene_source(&self) -> Result<SceneSource> {
        let s = &self.scene;
        match (&s.orbital, &s.insitu, &s.dir) {
            (None, None, None) => {
                s.synthetic.validate()?;
                Ok(SceneSource::Synthetic(s.synthetic.clone()))
            }
            (Some(o), Some(i), None) => {
                let mut load = LoadConfig::from(&s.synthetic);
                load.seed = Some(s.synthetic.seed);
                Ok(SceneSource::Files {
                    orbital: o.clone(),
                    insitu: i.clone(),
                    load,
                })
            }
            (None, None, Some(d)) => Ok(SceneSource::Dir(d.clone())),
            _ => Err(Error::config(
                "scene: set either both orbital and insitu, or dir, or neither (synthetic)",
            )),
        }
    }

    pub fn budget(&self) -> Result<Budget> {
        match (self.experiment.budget, self.experiment.path_length) {
            (Some(_), Some(_)) => Err(Error::config(
                "experiment.budget and experiment.path_length are mutually exclusive",
            )),
            (Some(b), None) => Ok(Budget::Samples(b)),
            (None, Some(p)) => Ok(Budget::PathCost(p)),
            (None, None) => Ok(Budget::Samples(DEFAULT_BUDGET)),
        }
    }

    /// The resolved experiment; `planners` overrides the configured list.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let e = &self.experiment;
        let cfg = ExperimentConfig {
            scene: self.scene_source()?,
            planners: e.planners.clone(),
            trials: e.trials,
            budget: self.budget()?,
            seed: e.seed,
            solver: self.solver,
            reward: self.reward,
            mcts: self.mcts,
            gss: self.gss,
            fixed_stride: e.fixed_stride,
            start: e.start,
            test: e.test,
            alpha: e.alpha,
            record_timing: e.record_timing,
            jobs: e.jobs,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let e = c.experiment().unwrap();
        assert_eq!(e.budget, Budget::Samples(25));
        assert_eq!(e.trials, 50);
        assert_eq!(e.mcts.iterations, 500);
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_toml(
            r#"
            [scene]
            K = 3
            highres_w = 64
            highres_h = 64
            [mcts]
            max_depth = 7
            [reward]
            kernel_lengthscale = 0.5
            [experiment]
            planners = ["nmpse", "random"]
            path_length = 250.0
            test = "pooled"
            sweep = { axis = "depth", values = [3, 5] }
            "#,
        )
        .unwrap();
        assert_eq!(c.scene.synthetic.k, 3);
        assert_eq!(c.mcts.max_depth, 7);
        let e = c.experiment().unwrap();
        assert_eq!(e.budget, Budget::PathCost(250.0));
        assert_eq!(e.planners, vec![PlannerKind::Nmpse, PlannerKind::Random]);
        assert_eq!(e.test, StatTest::Pooled);
        assert_eq!(c.experiment.sweep.unwrap().values, vec![3.0, 5.0]);
    }

    #[test]
    fn conflicting_budgets_and_unknown_keys() {
        let c = RunConfig::from_toml("[experiment]\nbudget = 5\npath_length = 20.0").unwrap();
        assert!(matches!(c.experiment(), Err(Error::ConfigInvalid(_))));
        assert!(matches!(RunConfig::from_toml("[mcts]\ndepth = 3"), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::from_toml("[bogus]\nx = 1"), Err(Error::Parse { .. })));
    }

    #[test]
    fn bad_downsample_names_fields() {
        let c = RunConfig::from_toml("[scene]\nhighres_w = 30\ndownsample = 4").unwrap();
        match c.experiment().unwrap_err() {
            Error::ConfigInvalid(m) => {
                assert!(m.contains("downsample") && m.contains("highres_w"), "{m}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_and_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default();
        c.set_seed(9);
        c.experiment.budget = Some(7);
        let plain = dir.path().join("c.json");
        fs::write(&plain, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(RunConfig::load(&plain).unwrap(), c);
        let manifest = dir.path().join("m.json");
        let m = serde_json::json!({"version": "0", "command": "plan", "seed": 9, "config": c});
        fs::write(&manifest, m.to_string()).unwrap();
        assert_eq!(RunConfig::load(&manifest).unwrap(), c);
        let toml_path = dir.path().join("c.toml");
        fs::write(&toml_path, "[experiment]\ntrials = \"many\"").unwrap();
        assert!(matches!(RunConfig::load(&toml_path), Err(Error::Parse { offset, .. }) if offset > 0));
    }
}
