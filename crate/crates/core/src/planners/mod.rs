//! Exploration planners: MCTS-based NMPSE, greedy spectral selection (GSS)
//! and the fixed-step and random baselines.

mod baselines;
mod gss;
pub mod mcts;
mod nmpse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ExplorationAction, GridCell};
use crate::scalar::Scalar;
use crate::spectral::{Provenance, SpectralLibrary, Spectrum};

pub use baselines::{fixed_step_plan, random_plan, serpentine};
pub use gss::{gss_plan, GssParams, GssSelection};
pub use mcts::{mcts_search, MctsParams, SearchProblem, SearchTree};
pub use nmpse::nmpse_run;

/// How long a planner keeps going.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Total in-situ samples, the start sample included.
    Samples(usize),
    /// Maximum travelled path cost.
    PathCost(f64),
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::Samples(0) => Err(Error::config("sampling budget must be at least 1")),
            Budget::PathCost(c) if !(c >= 0.0) => Err(Error::config("path budget must be >= 0")),
            _ => Ok(()),
        }
    }

    /// Whether another move of `step_cost` fits after `samples` samples and
    /// `cost` travelled.
    pub(crate) fn allows_move(&self, samples: usize, cost: f64, step_cost: f64) -> bool {
        match *self {
            Budget::Samples(b) => samples < b,
            Budget::PathCost(cap) => cost + step_cost <= cap + 1e-9,
        }
    }

    /// Value written to result files.
    pub fn value(&self) -> f64 {
        match *self {
            Budget::Samples(b) => b as f64,
            Budget::PathCost(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Nmpse,
    Gss,
    Fixed,
    Random,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [PlannerKind::Nmpse, PlannerKind::Gss, PlannerKind::Fixed, PlannerKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Nmpse => "nmpse",
            PlannerKind::Gss => "gss",
            PlannerKind::Fixed => "fixed",
            PlannerKind::Random => "random",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown planner {s:?} (expected nmpse, gss, fixed or random)")))
    }
}

/// What a planner did: sampled cells and spectra in order, the move into
/// each sampled cell, per-decision wall time and total travel cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOutcome<T> {
    pub cells: Vec<GridCell>,
    pub spectra: Vec<Spectrum<T>>,
    /// Move that reached each cell; `None` for the start and for tour legs
    /// longer than one move.
    pub actions: Vec<Option<ExplorationAction>>,
    /// Seconds per planning decision (NMPSE only).
    pub action_times: Vec<f64>,
    pub path_cost: f64,
}

impl<T: Scalar> PlannerOutcome<T> {
    pub(crate) fn start(cell: GridCell, spectrum: Spectrum<T>) -> Self {
        PlannerOutcome {
            cells: vec![cell],
            spectra: vec![spectrum],
            actions: vec![None],
            action_times: Vec::new(),
            path_cost: 0.0,
        }
    }

    pub(crate) fn push(&mut self, cell: GridCell, spectrum: Spectrum<T>, action: Option<ExplorationAction>) {
        self.cells.push(cell);
        self.spectra.push(spectrum);
        self.actions.push(action);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn end(&self) -> GridCell {
        *self.cells.last().expect("outcomes hold the start cell")
    }

    /// The collected in-situ library `Y`.
    pub fn library(&self) -> SpectralLibrary<T> {
        SpectralLibrary::from_spectra(self.spectra.iter().cloned(), Provenance::InSitu)
            .expect("in-situ spectra share the scene band count")
    }

    /// The library after the first `k` samples.
    pub fn library_prefix(&self, k: usize) -> SpectralLibrary<T> {
        SpectralLibrary::from_spectra(self.spectra[..k].iter().cloned(), Provenance::InSitu)
            .expect("in-situ spectra share the scene band count")
    }

    pub fn mean_action_time(&self) -> Option<f64> {
        (!self.action_times.is_empty())
            .then(|| self.action_times.iter().sum::<f64>() / self.action_times.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planner_names_round_trip() {
        for k in PlannerKind::ALL {
            assert_eq!(k.name().parse::<PlannerKind>().unwrap(), k);
        }
        assert!("greedy".parse::<PlannerKind>().is_err());
    }

    #[test]
    fn budget_moves() {
        assert!(Budget::Samples(3).allows_move(2, 0.0, 10.0));
        assert!(!Budget::Samples(3).allows_move(3, 0.0, 10.0));
        assert!(Budget::PathCost(20.0).allows_move(9, 10.0, 10.0));
        assert!(!Budget::PathCost(20.0).allows_move(1, 20.0, 10.0));
        assert!(Budget::Samples(0).validate().is_err());
    }
}
