//! The exploration MDP.
//!
//! A state holds the in-situ library `Y` collected at visited cells `V`, the
//! remote spectra `X_D` planned at cells `D`, and (through
//! [`ExplorationMdp`]) the scene. Actions move the planning cursor to one of
//! the eight neighbouring cells and append that cell's orbital spectrum to
//! `X_D`; `Y` and `V` never change inside one MDP. The reward of a state is
//! the differential entropy of `S = [Y X_D]` minus `τ` times the number of
//! repeated cells in `V ++ D`.

mod reward;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::scalar::Scalar;
use crate::scene::{GridMap, SceneryPair};
use crate::spectral::{Provenance, SpectralLibrary, Spectrum};

pub use crate::scene::GridCell;
pub use reward::{
    differential_entropy, gaussian_entropy, Lengthscale, RewardModel, RewardParams, SquaredExponential,
};

/// One of the eight compass moves on the grid, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExplorationAction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl ExplorationAction {
    pub const ALL: [ExplorationAction; 8] = [
        ExplorationAction::N,
        ExplorationAction::NE,
        ExplorationAction::E,
        ExplorationAction::SE,
        ExplorationAction::S,
        ExplorationAction::SW,
        ExplorationAction::W,
        ExplorationAction::NW,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(Δrow, Δcol)`; rows grow southwards.
    pub fn offset(self) -> (isize, isize) {
        use ExplorationAction::*;
        match self {
            N => (-1, 0),
            NE => (-1, 1),
            E => (0, 1),
            SE => (1, 1),
            S => (1, 0),
            SW => (1, -1),
            W => (0, -1),
            NW => (-1, -1),
        }
    }

    pub fn reverse(self) -> ExplorationAction {
        ExplorationAction::ALL[(self.index() + 4) % 8]
    }

    /// Target cell if it lies on the grid.
    pub fn apply(self, from: GridCell, grid: &GridMap) -> Option<GridCell> {
        let (dr, dc) = self.offset();
        let row = from.row.checked_add_signed(dr)?;
        let col = from.col.checked_add_signed(dc)?;
        let cell = GridCell::new(row, col);
        grid.contains(cell).then_some(cell)
    }

    /// The move from `from` to an adjacent `to`.
    pub fn between(from: GridCell, to: GridCell) -> Option<ExplorationAction> {
        let dr = to.row as isize - from.row as isize;
        let dc = to.col as isize - from.col as isize;
        ExplorationAction::ALL.into_iter().find(|a| a.offset() == (dr, dc))
    }
}

impl fmt::Display for ExplorationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState<T> {
    in_situ: Arc<SpectralLibrary<T>>,
    visited: Arc<[GridCell]>,
    planned_remote: SpectralLibrary<T>,
    planned_cells: Vec<GridCell>,
    revisits: usize,
    /// Cholesky factor of the kernel matrix over `[Y X_D]`.
    factor: Cholesky<T>,
}

impl<T: Scalar> ExplorationState<T> {
    pub fn in_situ(&self) -> &SpectralLibrary<T> {
        &self.in_situ
    }

    pub fn visited(&self) -> &[GridCell] {
        &self.visited
    }

    pub fn planned_remote(&self) -> &SpectralLibrary<T> {
        &self.planned_remote
    }

    pub fn planned_cells(&self) -> &[GridCell] {
        &self.planned_cells
    }

    /// Last appended cell of `V ++ D`.
    pub fn rover_cell(&self) -> GridCell {
        *self
            .planned_cells
            .last()
            .or(self.visited.last())
            .expect("states always hold at least one visited cell")
    }

    /// `S = [Y X_D]`.
    pub fn spectra(&self) -> impl Iterator<Item = &Spectrum<T>> {
        self.in_situ
            .columns()
            .iter()
            .chain(self.planned_remote.columns())
    }

    /// Cells in `V ++ D` that already appeared earlier in the sequence.
    pub fn revisits(&self) -> usize {
        self.revisits
    }

    fn contains_cell(&self, cell: GridCell) -> bool {
        self.visited.contains(&cell) || self.planned_cells.contains(&cell)
    }
}

/// Number of entries of the sequence whose cell already appeared earlier.
pub fn revisit_count<'a>(cells: impl IntoIterator<Item = &'a GridCell>) -> usize {
    let mut seen = std::collections::HashSet::new();
    cells.into_iter().filter(|c| !seen.insert(**c)).count()
}

/// The exploration MDP over a fixed scene and reward model.
#[derive(Debug, Clone)]
pub struct ExplorationMdp<'a, T> {
    scene: &'a SceneryPair<T>,
    reward: RewardModel<T>,
}

impl<'a, T: Scalar> ExplorationMdp<'a, T> {
    pub fn new(scene: &'a SceneryPair<T>, reward: RewardModel<T>) -> Self {
        ExplorationMdp { scene, reward }
    }

    pub fn scene(&self) -> &'a SceneryPair<T> {
        self.scene
    }

    pub fn reward_model(&self) -> &RewardModel<T> {
        &self.reward
    }

    /// Root of `MDP(t)`: the in-situ history with nothing planned yet.
    pub fn make_root(&self, visited: Vec<GridCell>, in_situ: SpectralLibrary<T>) -> Result<ExplorationState<T>> {
        if visited.is_empty() || visited.len() != in_situ.len() {
            return Err(Error::EmptyHistory);
        }
        for c in &visited {
            self.scene.grid.check(*c)?;
        }
        if in_situ.bands() != Some(self.scene.bands()) {
            return Err(Error::DimensionMismatch {
                expected: self.scene.bands(),
                found: in_situ.bands().unwrap_or(0),
            });
        }
        let refs: Vec<&Spectrum<T>> = in_situ.columns().iter().collect();
        let factor = Cholesky::factor_with_jitter(&self.reward.kernel.gram(&refs), refs.len())?;
        Ok(ExplorationState {
            revisits: revisit_count(&visited),
            in_situ: Arc::new(in_situ),
            visited: visited.into(),
            planned_remote: SpectralLibrary::new(),
            planned_cells: Vec::new(),
            factor,
        })
    }

    /// Moves whose target cell is on the grid, in action order.
    pub fn valid_actions(&self, state: &ExplorationState<T>) -> Vec<ExplorationAction> {
        let here = state.rover_cell();
        ExplorationAction::ALL
            .into_iter()
            .filter(|a| a.apply(here, &self.scene.grid).is_some())
            .collect()
    }

    /// Deterministic transition: appends the target cell to `D` and its
    /// orbital spectrum to `X_D`, returning the successor and its reward.
    pub fn step(&self, state: &ExplorationState<T>, action: ExplorationAction) -> Result<(ExplorationState<T>, T)> {
        let here = state.rover_cell();
        let target = action
            .apply(here, &self.scene.grid)
            .ok_or_else(|| Error::InvalidAction(format!("{action} from ({}, {})", here.row, here.col)))?;
        let remote = self.scene.remote(target);
        let kernel = &self.reward.kernel;
        let cross: Vec<T> = state
            .spectra()
            .map(|s| kernel.cross(s.as_slice(), remote.as_slice()))
            .collect();
        let revisits = state.revisits + usize::from(state.contains_cell(target));
        let mut planned_remote = state.planned_remote.clone();
        planned_remote.push(remote.clone(), Provenance::Remote)?;
        let mut planned_cells = Vec::with_capacity(state.planned_cells.len() + 1);
        planned_cells.extend_from_slice(&state.planned_cells);
        planned_cells.push(target);

        let factor = match state.factor.extend(&cross, kernel.diag()) {
            Some(f) => f,
            None => {
                let refs: Vec<&Spectrum<T>> = state.spectra().chain(std::iter::once(remote)).collect();
                Cholesky::factor_with_jitter(&kernel.gram(&refs), refs.len())?
            }
        };
        let next = ExplorationState {
            in_situ: Arc::clone(&state.in_situ),
            visited: Arc::clone(&state.visited),
            planned_remote,
            planned_cells,
            revisits,
            factor,
        };
        let r = self.state_reward(&next);
        Ok((next, r))
    }

    fn state_reward(&self, state: &ExplorationState<T>) -> T {
        gaussian_entropy(&state.factor) - self.reward.tau * T::of(state.revisits as f64)
    }

    /// `R(s) = ½ ln|2πe Σ_{S,S}| − τ U(S)`, recomputed from scratch.
    pub fn reward(&self, state: &ExplorationState<T>) -> Result<T> {
        reward(state, &self.reward)
    }
}

/// `R(s) = ½ ln|2πe Σ_{S,S}| − τ U(S)` for an arbitrary state, from scratch.
pub fn reward<T: Scalar>(state: &ExplorationState<T>, model: &RewardModel<T>) -> Result<T> {
    let spectra: Vec<&Spectrum<T>> = state.spectra().collect();
    let h = differential_entropy(&spectra, &model.kernel)?;
    let u = revisit_count(state.visited.iter().chain(&state.planned_cells));
    Ok(h - model.tau * T::of(u as f64))
}
