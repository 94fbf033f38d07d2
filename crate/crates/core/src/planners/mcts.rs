//! UCT Monte-Carlo tree search over a deterministic problem.
//!
//! Each call to [`SearchTree::simulate`] walks the tree from the root. A
//! node with untried actions expands one of them (picked uniformly), scores
//! the new edge with a random rollout and records that return on the edge;
//! a fully expanded node selects `argmax_a Q(s,a) + κ √(ln N(s) / N(s,a))`
//! and recurses. Returns are discounted by `γ` and the walk stops once
//! `γ^depth < ε`.

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ExplorationAction, ExplorationMdp, ExplorationState};
use crate::rng::RandomStream;
use crate::scalar::Scalar;

/// A deterministic sequential decision problem.
pub trait SearchProblem {
    type State: Clone;
    type Action: Copy + Eq + Debug;

    /// Valid actions in a fixed order; position in this list is the
    /// tie-breaking index.
    fn actions(&self, state: &Self::State) -> Vec<Self::Action>;

    /// Successor state and the reward of that successor.
    fn step(&self, state: &Self::State, action: Self::Action) -> Result<(Self::State, f64)>;

    /// The action undoing `action`, if the problem has one.
    fn reverse(&self, _action: Self::Action) -> Option<Self::Action> {
        None
    }
}

impl<T: Scalar> SearchProblem for ExplorationMdp<'_, T> {
    type State = ExplorationState<T>;
    type Action = ExplorationAction;

    fn actions(&self, state: &Self::State) -> Vec<ExplorationAction> {
        self.valid_actions(state)
    }

    fn step(&self, state: &Self::State, action: ExplorationAction) -> Result<(Self::State, f64)> {
        ExplorationMdp::step(self, state, action).map(|(s, r)| (s, r.as_f64()))
    }

    fn reverse(&self, action: ExplorationAction) -> Option<ExplorationAction> {
        Some(action.reverse())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsParams {
    pub iterations: usize,
    pub max_depth: usize,
    pub gamma: f64,
    /// UCB exploration weight.
    pub kappa: f64,
    /// Horizon cutoff; `None` means `γ^(max_depth − ½)`, which stops the
    /// walk after exactly `max_depth` rewards.
    pub epsilon: Option<f64>,
    /// Rollouts avoid undoing the previous move when at least two other
    /// moves exist.
    pub rollout_no_reverse: bool,
}

impl Default for MctsParams {
    fn default() -> Self {
        MctsParams {
            iterations: 500,
            max_depth: 5,
            gamma: 0.9,
            kappa: 1.0,
            epsilon: None,
            rollout_no_reverse: true,
        }
    }
}

impl MctsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("mcts.gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.iterations == 0 {
            return Err(Error::config("mcts.iterations must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("mcts.max_depth must be at least 1"));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::config("mcts.kappa must be >= 0"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::config("mcts.epsilon must be positive"));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| self.gamma.powf(self.max_depth as f64 - 0.5))
    }
}

#[derive(Debug, Clone)]
pub struct Edge<A> {
    pub action: A,
    pub visits: u64,
    pub q: f64,
    /// Reward of the successor state.
    pub reward: f64,
    child: Option<usize>,
}

#[derive(Debug, Clone)]
struct Node<S, A> {
    state: S,
    visits: u64,
    edges: Vec<Edge<A>>,
    /// Positions in `edges` not yet expanded.
    untried: Vec<usize>,
    depth: usize,
}

/// Search tree owned by a single [`mcts_search`] call.
pub struct SearchTree<'p, P: SearchProblem> {
    problem: &'p P,
    params: MctsParams,
    epsilon: f64,
    nodes: Vec<Node<P::State, P::Action>>,
    /// Per-edge list of backed-up returns, kept only when tracing.
    trace: Option<Vec<Vec<Vec<f64>>>>,
}

impl<'p, P: SearchProblem> SearchTree<'p, P> {
    pub fn new(problem: &'p P, root: P::State, params: MctsParams) -> Result<Self> {
        params.validate()?;
        let mut tree = SearchTree {
            problem,
            params,
            epsilon: params.epsilon(),
            nodes: Vec::new(),
            trace: None,
        };
        tree.add_node(root, 0);
        Ok(tree)
    }

    /// Keep every backed-up return so tests can compare `Q` to a stored mean.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(vec![vec![Vec::new(); self.nodes[0].edges.len()]]);
        self
    }

    fn add_node(&mut self, state: P::State, depth: usize) -> usize {
        let edges: Vec<Edge<P::Action>> = self
            .problem
            .actions(&state)
            .into_iter()
            .map(|action| Edge {
                action,
                visits: 0,
                q: 0.0,
                reward: 0.0,
                child: None,
            })
            .collect();
        let untried = (0..edges.len()).collect();
        if let Some(t) = &mut self.trace {
            t.push(vec![Vec::new(); edges.len()]);
        }
        self.nodes.push(Node {
            state,
            visits: 0,
            edges,
            untried,
            depth,
        });
        self.nodes.len() - 1
    }

    fn cut(&self, depth: usize) -> bool {
        self.params.gamma.powi(depth as i32) < self.epsilon
    }

    /// One simulation from the root; returns the discounted return.
    pub fn simulate(&mut self, rng: &mut RandomStream) -> Result<f64> {
        self.simulate_node(0, rng)
    }

    fn simulate_node(&mut self, id: usize, rng: &mut RandomStream) -> Result<f64> {
        let depth = self.nodes[id].depth;
        if self.cut(depth) || self.nodes[id].edges.is_empty() {
            return Ok(0.0);
        }
        let gamma = self.params.gamma;
        if !self.nodes[id].untried.is_empty() {
            let pick = rng.index(self.nodes[id].untried.len());
            let e = self.nodes[id].untried.swap_remove(pick);
            let action = self.nodes[id].edges[e].action;
            let (next, r) = self.problem.step(&self.nodes[id].state, action)?;
            let g = r + gamma * self.rollout_from(&next, depth + 1, Some(action), rng)?;
            let child = self.add_node(next, depth + 1);
            let node = &mut self.nodes[id];
            node.visits += 1;
            let edge = &mut node.edges[e];
            edge.child = Some(child);
            edge.reward = r;
            edge.visits = 1;
            edge.q = g;
            self.record(id, e, g);
            return Ok(g);
        }
        let e = self.select(id);
        let (r, child) = {
            let edge = &self.nodes[id].edges[e];
            (edge.reward, edge.child.expect("tried edges have children"))
        };
        let g = r + gamma * self.simulate_node(child, rng)?;
        let node = &mut self.nodes[id];
        node.visits += 1;
        let edge = &mut node.edges[e];
        edge.visits += 1;
        edge.q += (g - edge.q) / edge.visits as f64;
        self.record(id, e, g);
        Ok(g)
    }

    fn record(&mut self, node: usize, edge: usize, g: f64) {
        if let Some(t) = &mut self.trace {
            t[node][edge].push(g);
        }
    }

    /// UCB choice at a fully expanded node; ties go to the lowest index.
    fn select(&self, id: usize) -> usize {
        let node = &self.nodes[id];
        let ln_n = (node.visits as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in node.edges.iter().enumerate() {
            debug_assert!(e.visits > 0);
            let score = e.q + self.params.kappa * (ln_n / e.visits as f64).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    /// Random-policy discounted return from `state` at `depth`.
    pub fn rollout(&self, state: &P::State, depth: usize, rng: &mut RandomStream) -> Result<f64> {
        self.rollout_from(state, depth, None, rng)
    }

    fn rollout_from(
        &self,
        state: &P::State,
        mut depth: usize,
        mut prev: Option<P::Action>,
        rng: &mut RandomStream,
    ) -> Result<f64> {
        let gamma = self.params.gamma;
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut state = state.clone();
        while !self.cut(depth) {
            let mut actions = self.problem.actions(&state);
            if self.params.rollout_no_reverse {
                if let Some(back) = prev.and_then(|p| self.problem.reverse(p)) {
                    if actions.len() >= 3 && actions.contains(&back) {
                        actions.retain(|a| *a != back);
                    }
                }
            }
            if actions.is_empty() {
                break;
            }
            let a = actions[rng.random_range(0..actions.len())];
            let (next, r) = self.problem.step(&state, a)?;
            total += discount * r;
            discount *= gamma;
            state = next;
            prev = Some(a);
            depth += 1;
        }
        Ok(total)
    }

    /// Root edges in action order.
    pub fn root_edges(&self) -> &[Edge<P::Action>] {
        &self.nodes[0].edges
    }

    pub fn root_visits(&self) -> u64 {
        self.nodes[0].visits
    }

    /// Root action with the highest `Q` among tried edges; ties go to the
    /// lowest index.
    pub fn best_action(&self) -> Option<P::Action> {
        let mut best: Option<&Edge<P::Action>> = None;
        for e in self.root_edges().iter().filter(|e| e.visits > 0) {
            if best.is_none_or(|b| e.q > b.q) {
                best = Some(e);
            }
        }
        best.map(|e| e.action)
    }

    /// Checks `N(s) = Σ_a N(s,a)` everywhere and, when tracing, that every
    /// `Q` equals the mean of its stored returns. Returns the largest
    /// absolute `Q` discrepancy.
    pub fn check_statistics(&self) -> Option<f64> {
        let mut worst = 0.0f64;
        for (id, node) in self.nodes.iter().enumerate() {
            let sum: u64 = node.edges.iter().map(|e| e.visits).sum();
            if sum != node.visits {
                return None;
            }
            if let Some(t) = &self.trace {
                for (e, edge) in node.edges.iter().enumerate() {
                    let rs = &t[id][e];
                    if rs.len() as u64 != edge.visits {
                        return None;
                    }
                    if !rs.is_empty() {
                        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
                        worst = worst.max((mean - edge.q).abs());
                    }
                }
            }
        }
        Some(worst)
    }
}

/// Runs `params.iterations` simulations from `root` and returns the best
/// root action.
pub fn mcts_search<P: SearchProblem>(
    problem: &P,
    root: P::State,
    params: &MctsParams,
    rng: &mut RandomStream,
) -> Result<P::Action> {
    let actions = problem.actions(&root);
    match actions.len() {
        0 => return Err(Error::NoValidActions),
        1 => return Ok(actions[0]),
        _ => {}
    }
    let mut tree = SearchTree::new(problem, root, *params)?;
    for _ in 0..params.iterations {
        tree.simulate(rng)?;
    }
    tree.best_action().ok_or(Error::NoValidActions)
}

/// Small explicit trees for tests: node `i` has children `children[i]` with
/// edge rewards `rewards[i]`.
#[derive(Debug, Clone)]
pub struct ToyTree {
    pub children: Vec<Vec<usize>>,
    pub rewards: Vec<Vec<f64>>,
}

impl ToyTree {
    /// Random tree of the given depth with 1..=`max_branch` children per
    /// internal node and edge rewards uniform on `[0, 1)`.
    pub fn random(depth: usize, max_branch: usize, rng: &mut RandomStream) -> ToyTree {
        let mut children = vec![Vec::new()];
        let mut rewards = vec![Vec::new()];
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &n in &frontier {
                let b = rng.random_range(1..=max_branch);
                for _ in 0..b {
                    let id = children.len();
                    children.push(Vec::new());
                    rewards.push(Vec::new());
                    children[n].push(id);
                    rewards[n].push(rng.random::<f64>());
                    next.push(id);
                }
            }
            frontier = next;
        }
        ToyTree { children, rewards }
    }

    /// Optimal discounted value and first action from `node`, exhaustively.
    pub fn expectimax(&self, node: usize, gamma: f64) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (i, (&c, &r)) in self.children[node].iter().zip(&self.rewards[node]).enumerate() {
            let v = r + gamma * self.expectimax(c, gamma).0;
            if best.1.is_none() || v > best.0 {
                best = (v, Some(i));
            }
        }
        best
    }
}

impl SearchProblem for ToyTree {
    type State = usize;
    type Action = usize;

    fn actions(&self, state: &usize) -> Vec<usize> {
        (0..self.children[*state].len()).collect()
    }

    fn step(&self, state: &usize, action: usize) -> Result<(usize, f64)> {
        Ok((self.children[*state][action], self.rewards[*state][action]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(iterations: usize, max_depth: usize, gamma: f64) -> MctsParams {
        MctsParams {
            iterations,
            max_depth,
            gamma,
            rollout_no_reverse: false,
            ..MctsParams::default()
        }
    }

    fn chain(rewards: &[f64]) -> ToyTree {
        let n = rewards.len();
        ToyTree {
            children: (0..=n).map(|i| if i < n { vec![i + 1] } else { vec![] }).collect(),
            rewards: (0..=n).map(|i| if i < n { vec![rewards[i]] } else { vec![] }).collect(),
        }
    }

    #[test]
    fn default_epsilon_stops_after_max_depth_rewards() {
        let toy = chain(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let p = params(1, 3, 0.5);
        let tree = SearchTree::new(&toy, 0, p).unwrap();
        let g = tree.rollout(&0, 0, &mut RandomStream::from_seed(0)).unwrap();
        assert!((g - 1.75).abs() < 1e-12);
    }

    #[test]
    fn chain_return_is_discounted_sum() {
        let (r1, r2, r3) = (0.7, 0.2, 0.9);
        let toy = chain(&[r1, r2, r3]);
        let p = params(1, 3, 0.5);
        let mut tree = SearchTree::new(&toy, 0, p).unwrap();
        let mut rng = RandomStream::from_seed(1);
        for _ in 0..5 {
            let g = tree.simulate(&mut rng).unwrap();
            assert!((g - (r1 + 0.5 * r2 + 0.25 * r3)).abs() < 1e-12);
        }
        let rollout = tree.rollout(&0, 0, &mut rng).unwrap();
        assert!((rollout - (r1 + 0.5 * r2 + 0.25 * r3)).abs() < 1e-12);
    }

    #[test]
    fn cutoff_returns_zero_without_touching_counters() {
        let toy = chain(&[1.0, 1.0]);
        let p = MctsParams {
            epsilon: Some(2.0),
            ..params(1, 3, 0.5)
        };
        let mut tree = SearchTree::new(&toy, 0, p).unwrap();
        assert_eq!(tree.simulate(&mut RandomStream::from_seed(0)).unwrap(), 0.0);
        assert_eq!(tree.root_visits(), 0);
        assert!(tree.root_edges().iter().all(|e| e.visits == 0));
    }

    #[test]
    fn untried_first_covers_every_root_action() {
        let toy = ToyTree {
            children: vec![(1..=8).collect(), vec![], vec![], vec![], vec![], vec![], vec![], vec![], vec![]],
            rewards: vec![(0..8).map(|i| i as f64 / 8.0).collect(); 1]
                .into_iter()
                .chain(std::iter::repeat_n(vec![], 8))
                .collect(),
        };
        let mut tree = SearchTree::new(&toy, 0, params(8, 2, 0.9)).unwrap();
        let mut rng = RandomStream::from_seed(3);
        for _ in 0..8 {
            tree.simulate(&mut rng).unwrap();
        }
        assert!(tree.root_edges().iter().all(|e| e.visits == 1));
        assert_eq!(tree.best_action(), Some(7));
    }

    #[test]
    fn two_step_toy_matches_expectimax() {
        // a=0 pays 1 now and 0 later; a=1 pays 0.2 then 1.5.
        let toy = ToyTree {
            children: vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![], vec![], vec![], vec![]],
            rewards: vec![vec![1.0, 0.2], vec![0.0, 0.1], vec![1.5, 0.0], vec![], vec![], vec![], vec![]],
        };
        let (_, best) = toy.expectimax(0, 0.9);
        assert_eq!(best, Some(1));
        let a = mcts_search(&toy, 0, &params(2000, 2, 0.9), &mut RandomStream::from_seed(5)).unwrap();
        assert_eq!(Some(a), best);
    }

    #[test]
    fn forced_move_short_circuits() {
        let toy = chain(&[0.3]);
        let a = mcts_search(&toy, 0, &params(1, 1, 0.9), &mut RandomStream::from_seed(0)).unwrap();
        assert_eq!(a, 0);
        let leaf = chain(&[]);
        assert!(matches!(
            mcts_search(&leaf, 0, &params(1, 1, 0.9), &mut RandomStream::from_seed(0)),
            Err(Error::NoValidActions)
        ));
    }

    #[test]
    fn backup_matches_stored_returns() {
        let mut rng = RandomStream::from_seed(11);
        for seed in 0..10 {
            let toy = ToyTree::random(4, 3, &mut RandomStream::from_seed(seed));
            let mut tree = SearchTree::new(&toy, 0, params(300, 4, 0.8)).unwrap().with_trace();
            for _ in 0..300 {
                tree.simulate(&mut rng).unwrap();
            }
            let worst = tree.check_statistics().expect("visit counts consistent");
            assert!(worst < 1e-9, "Q drifted by {worst}");
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MctsParams { gamma: 1.0, ..MctsParams::default() }.validate().is_err());
        assert!(MctsParams { iterations: 0, ..MctsParams::default() }.validate().is_err());
        assert!(MctsParams { max_depth: 0, ..MctsParams::default() }.validate().is_err());
    }

    #[test]
    fn rollout_mean_is_stable_across_seeds() {
        let toy = ToyTree::random(3, 3, &mut RandomStream::from_seed(2));
        let tree = SearchTree::new(&toy, 0, params(1, 3, 0.9)).unwrap();
        let stats = |seed| {
            let mut rng = RandomStream::from_seed(seed);
            let xs: Vec<f64> = (0..10_000).map(|_| tree.rollout(&0, 0, &mut rng).unwrap()).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (m, (v / xs.len() as f64).sqrt())
        };
        let (m1, se1) = stats(100);
        let (m2, se2) = stats(200);
        assert!((m1 - m2).abs() < 3.0 * (se1 * se1 + se2 * se2).sqrt());
    }
}
