use serde::{Deserialize, Serialize};

use super::PlannerOutcome;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::mdp::{ExplorationAction, GridCell, RewardModel};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::scene::{GridMap, SceneryPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GssParams {
    /// Travel budget; when unset the paired NMPSE run's path cost is used.
    pub path_budget: Option<f64>,
    /// Goal cell; when unset the paired NMPSE run's end cell is used.
    pub goal: Option<GridCell>,
    /// Candidate waypoints are every `waypoint_stride`-th grid cell in each
    /// direction.
    pub waypoint_stride: usize,
}

impl Default for GssParams {
    fn default() -> Self {
        GssParams {
            path_budget: None,
            goal: None,
            waypoint_stride: 1,
        }
    }
}

impl GssParams {
    pub fn validate(&self) -> Result<()> {
        if self.waypoint_stride == 0 {
            return Err(Error::config("gss.waypoint_stride must be at least 1"));
        }
        if self.path_budget.is_some_and(|b| !(b >= 0.0)) {
            return Err(Error::config("gss.path_budget must be >= 0"));
        }
        Ok(())
    }

    pub fn waypoints(&self, grid: &GridMap) -> Vec<GridCell> {
        let s = self.waypoint_stride.max(1);
        grid.cells().filter(|c| c.row % s == 0 && c.col % s == 0).collect()
    }
}

/// Result of the greedy selection.
#[derive(Debug, Clone, PartialEq)]
pub struct GssSelection {
    /// Waypoints in the order they were selected (start and goal excluded).
    pub selected: Vec<GridCell>,
    /// Visiting order from start to goal.
    pub tour: Vec<GridCell>,
    pub cost: f64,
}

/// Cheapest position to insert `v` into an open tour and the added cost.
/// Ties go to the earliest position.
pub(crate) fn cheapest_insertion(tour: &[GridCell], v: GridCell, grid: &GridMap) -> (usize, f64) {
    let mut best = (1, f64::INFINITY);
    for i in 1..tour.len() {
        let d = grid.travel_cost(tour[i - 1], v) + grid.travel_cost(v, tour[i]) - grid.travel_cost(tour[i - 1], tour[i]);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[cfg(test)]
pub(crate) fn tour_cost(tour: &[GridCell], grid: &GridMap) -> f64 {
    tour.windows(2).map(|w| grid.travel_cost(w[0], w[1])).sum()
}

/// Greedy maximum-entropy waypoint selection over remote spectra under a
/// travel budget. Each round adds the candidate whose remote spectrum has
/// the largest conditional variance given the current set (equivalently the
/// largest `R(Q ∪ v)`), and stops when inserting it would exceed the budget.
pub fn gss_select<T: Scalar>(
    scene: &SceneryPair<T>,
    start: GridCell,
    goal: GridCell,
    travel_budget: f64,
    waypoints: &[GridCell],
    reward: &RewardModel<T>,
) -> Result<GssSelection> {
    let grid = &scene.grid;
    grid.check(start)?;
    grid.check(goal)?;
    let required = grid.travel_cost(start, goal);
    if required > travel_budget + 1e-9 {
        return Err(Error::InfeasibleBudget {
            budget: travel_budget,
            required,
        });
    }
    for w in waypoints {
        grid.check(*w)?;
    }
    let kernel = &reward.kernel;
    let mut tour = vec![start, goal];
    let mut members: Vec<GridCell> = if start == goal { vec![start] } else { vec![start, goal] };
    let refs: Vec<_> = members.iter().map(|c| scene.remote(*c)).collect();
    let mut factor = Cholesky::factor_with_jitter(&kernel.gram(&refs), refs.len())?;
    let mut cost = required;
    let mut selected = Vec::new();

    loop {
        let mut best: Option<(GridCell, T)> = None;
        for &v in waypoints {
            if members.contains(&v) {
                continue;
            }
            let x = scene.remote(v);
            let cross: Vec<T> = members
                .iter()
                .map(|m| kernel.cross(scene.remote(*m).as_slice(), x.as_slice()))
                .collect();
            let var = factor.conditional_variance(&cross, kernel.diag());
            if best.is_none_or(|(_, b)| var > b) {
                best = Some((v, var));
            }
        }
        let Some((v, _)) = best else { break };
        let (pos, extra) = cheapest_insertion(&tour, v, grid);
        if cost + extra > travel_budget + 1e-9 {
            break;
        }
        let x = scene.remote(v);
        let cross: Vec<T> = members
            .iter()
            .map(|m| kernel.cross(scene.remote(*m).as_slice(), x.as_slice()))
            .collect();
        factor = match factor.extend(&cross, kernel.diag()) {
            Some(f) => f,
            None => {
                let mut refs: Vec<_> = members.iter().map(|c| scene.remote(*c)).collect();
                refs.push(x);
                Cholesky::factor_with_jitter(&kernel.gram(&refs), refs.len())?
            }
        };
        members.push(v);
        tour.insert(pos, v);
        cost += extra;
        selected.push(v);
    }
    Ok(GssSelection { selected, tour, cost })
}

/// Plans a GSS tour and executes it, sampling in situ at every waypoint.
/// The path between waypoints is travelled but not sampled.
pub fn gss_plan<T: Scalar>(
    scene: &SceneryPair<T>,
    start: GridCell,
    goal: GridCell,
    travel_budget: f64,
    waypoints: &[GridCell],
    reward: &RewardModel<T>,
    rng: &mut RandomStream,
) -> Result<PlannerOutcome<T>> {
    let sel = gss_select(scene, start, goal, travel_budget, waypoints, reward)?;
    let mut out = PlannerOutcome::start(start, scene.sample_in_situ(start, rng)?);
    for leg in sel.tour.windows(2) {
        let (from, to) = (leg[0], leg[1]);
        if to == start && out.cells.contains(&to) {
            continue;
        }
        let action = from.is_adjacent(&to).then(|| ExplorationAction::between(from, to)).flatten();
        out.push(to, scene.sample_in_situ(to, rng)?, action);
    }
    out.path_cost = sel.cost;
    Ok(out)
}
