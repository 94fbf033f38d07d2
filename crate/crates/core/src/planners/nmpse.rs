use std::time::Instant;

use super::mcts::{mcts_search, MctsParams};
use super::{Budget, PlannerOutcome};
use crate::error::Result;
use crate::mdp::{ExplorationMdp, GridCell, RewardModel};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::scene::SceneryPair;

/// Receding-horizon exploration: at every step a fresh search tree over the
/// exploration MDP picks one move, the rover takes it and samples in situ,
/// and the tree is thrown away.
pub fn nmpse_run<T: Scalar>(
    scene: &SceneryPair<T>,
    start: GridCell,
    budget: Budget,
    reward: RewardModel<T>,
    params: &MctsParams,
    rng: &mut RandomStream,
) -> Result<PlannerOutcome<T>> {
    scene.grid.check(start)?;
    budget.validate()?;
    params.validate()?;
    let mut noise = rng.split();
    let mut search = rng.split();
    let mdp = ExplorationMdp::new(scene, reward);
    let step_cost = scene.grid.step_cost();

    let mut out = PlannerOutcome::start(start, scene.sample_in_situ(start, &mut noise)?);
    while budget.allows_move(out.len(), out.path_cost, step_cost) {
        let root = mdp.make_root(out.cells.clone(), out.library())?;
        let t0 = Instant::now();
        let action = mcts_search(&mdp, root, params, &mut search)?;
        out.action_times.push(t0.elapsed().as_secs_f64());
        let target = action
            .apply(out.end(), &scene.grid)
            .expect("search returns valid actions");
        out.push(target, scene.sample_in_situ(target, &mut noise)?, Some(action));
        out.path_cost += step_cost;
    }
    Ok(out)
}
