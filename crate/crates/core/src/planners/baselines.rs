use super::{Budget, PlannerOutcome};
use crate::error::{Error, Result};
use crate::mdp::{ExplorationAction, GridCell};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::scene::{GridMap, SceneryPair};

/// Boustrophedon walk over the grid starting eastward from `start`. At the
/// east/west edge the walk steps one row and reverses; at the north/south
/// edge the vertical direction reverses too. Yields `len` cells, `start`
/// first.
pub fn serpentine(grid: &GridMap, start: GridCell, len: usize) -> Result<Vec<GridCell>> {
    grid.check(start)?;
    let mut cells = vec![start];
    let (mut east, mut south) = (true, true);
    let mut here = start;
    while cells.len() < len {
        let horizontal = if east { ExplorationAction::E } else { ExplorationAction::W };
        let next = match horizontal.apply(here, grid) {
            Some(c) => c,
            None => {
                east = !east;
                let vertical = |s: bool| if s { ExplorationAction::S } else { ExplorationAction::N };
                match vertical(south).apply(here, grid) {
                    Some(c) => c,
                    None => {
                        south = !south;
                        match vertical(south).apply(here, grid) {
                            Some(c) => c,
                            // 1×1 grid, or a single column walk that just turned.
                            None => horizontal.reverse().apply(here, grid).ok_or(Error::NoValidActions)?,
                        }
                    }
                }
            }
        };
        cells.push(next);
        here = next;
    }
    Ok(cells)
}

/// Walks the serpentine from `start`, sampling every `stride`-th cell.
pub fn fixed_step_plan<T: Scalar>(
    scene: &SceneryPair<T>,
    start: GridCell,
    budget: Budget,
    stride: usize,
    rng: &mut RandomStream,
) -> Result<PlannerOutcome<T>> {
    budget.validate()?;
    if stride == 0 {
        return Err(Error::config("fixed-step stride must be at least 1"));
    }
    let step_cost = scene.grid.step_cost();
    let leg = step_cost * stride as f64;
    let mut out = PlannerOutcome::start(start, scene.sample_in_situ(start, rng)?);
    let mut walked = 0usize;
    let mut walk = serpentine(&scene.grid, start, 1)?;
    while budget.allows_move(out.len(), out.path_cost + leg - step_cost, step_cost) {
        walk = serpentine(&scene.grid, start, walk.len().max(walked + stride + 1) * 2)?;
        let target = walk[walked + stride];
        let action = (stride == 1)
            .then(|| ExplorationAction::between(walk[walked], target))
            .flatten();
        walked += stride;
        out.push(target, scene.sample_in_situ(target, rng)?, action);
        out.path_cost += leg;
    }
    Ok(out)
}

/// Moves to a uniformly random valid neighbour and samples, until the
/// budget is spent.
pub fn random_plan<T: Scalar>(
    scene: &SceneryPair<T>,
    start: GridCell,
    budget: Budget,
    rng: &mut RandomStream,
) -> Result<PlannerOutcome<T>> {
    budget.validate()?;
    let step_cost = scene.grid.step_cost();
    let mut out = PlannerOutcome::start(start, scene.sample_in_situ(start, rng)?);
    while budget.allows_move(out.len(), out.path_cost, step_cost) {
        let (action, target) = random_neighbour(&scene.grid, out.end(), rng)?;
        out.push(target, scene.sample_in_situ(target, rng)?, Some(action));
        out.path_cost += step_cost;
    }
    Ok(out)
}

fn random_neighbour(grid: &GridMap, here: GridCell, rng: &mut RandomStream) -> Result<(ExplorationAction, GridCell)> {
    let options: Vec<_> = ExplorationAction::ALL
        .into_iter()
        .filter_map(|a| a.apply(here, grid).map(|c| (a, c)))
        .collect();
    if options.is_empty() {
        return Err(Error::NoValidActions);
    }
    Ok(options[rng.index(options.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_synthetic_scene, SceneConfig};

    fn scene(w: usize, h: usize) -> SceneryPair<f64> {
        let cfg = SceneConfig {
            k: 2,
            bands: 4,
            highres_w: w * 4,
            highres_h: h * 4,
            patch_size: 4,
            blur_radius: 1,
            ..SceneConfig::default()
        };
        generate_synthetic_scene(&cfg, 5).unwrap()
    }

    #[test]
    fn eastward_corridor() {
        let s = scene(10, 4);
        let out = fixed_step_plan(&s, GridCell::new(1, 2), Budget::Samples(3), 1, &mut RandomStream::from_seed(0)).unwrap();
        assert_eq!(out.cells, vec![GridCell::new(1, 2), GridCell::new(1, 3), GridCell::new(1, 4)]);
        assert_eq!(out.path_cost, 20.0);
    }

    #[test]
    fn serpentine_wraps_and_reverses() {
        let g = GridMap::new(3, 3, 1, 10.0).unwrap();
        let walk = serpentine(&g, GridCell::new(1, 1), 8).unwrap();
        let expect = [(1, 1), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0), (1, 1), (1, 2)];
        assert_eq!(walk, expect.map(|(r, c)| GridCell::new(r, c)));
        assert!(walk.windows(2).all(|w| w[0].is_adjacent(&w[1])));
        let col = GridMap::new(1, 3, 1, 10.0).unwrap();
        let walk = serpentine(&col, GridCell::new(0, 0), 5).unwrap();
        assert_eq!(walk.iter().map(|c| c.row).collect::<Vec<_>>(), vec![0, 1, 2, 1, 0]);
        let dot = GridMap::new(1, 1, 1, 10.0).unwrap();
        assert!(serpentine(&dot, GridCell::new(0, 0), 2).is_err());
    }

    #[test]
    fn stride_samples_every_other_cell() {
        let s = scene(6, 6);
        let mut rng = RandomStream::from_seed(0);
        let out = fixed_step_plan(&s, GridCell::new(0, 0), Budget::Samples(4), 2, &mut rng).unwrap();
        let walk = serpentine(&s.grid, GridCell::new(0, 0), 7).unwrap();
        assert_eq!(out.cells, vec![walk[0], walk[2], walk[4], walk[6]]);
        assert_eq!(out.path_cost, 60.0);
        let again = fixed_step_plan(&s, GridCell::new(0, 0), Budget::Samples(4), 2, &mut RandomStream::from_seed(9)).unwrap();
        assert_eq!(out.cells, again.cells);
    }

    #[test]
    fn fixed_step_respects_path_budget() {
        let s = scene(6, 6);
        let out = fixed_step_plan(&s, GridCell::new(0, 0), Budget::PathCost(45.0), 2, &mut RandomStream::from_seed(0)).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.path_cost, 40.0);
    }

    #[test]
    fn random_walk_is_adjacent_and_seeded() {
        let s = scene(8, 8);
        let run = |seed| random_plan(&s, GridCell::new(4, 4), Budget::Samples(30), &mut RandomStream::from_seed(seed)).unwrap();
        let a = run(3);
        assert_eq!(a.len(), 30);
        assert!(a.cells.windows(2).all(|w| w[0].is_adjacent(&w[1])));
        assert_eq!(a.cells, run(3).cells);
        assert_ne!(a.cells, run(4).cells);
    }

    #[test]
    fn interior_direction_frequencies_are_uniform() {
        let g = GridMap::new(64, 64, 1, 10.0).unwrap();
        let mut rng = RandomStream::from_seed(42);
        let mut counts = [0usize; 8];
        let n = 100_000;
        for _ in 0..n {
            let (a, _) = random_neighbour(&g, GridCell::new(30, 30), &mut rng).unwrap();
            counts[a.index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.125).abs() < 0.01, "{counts:?}");
        }
    }
}
