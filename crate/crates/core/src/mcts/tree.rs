use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ucb::score_with_ln;
use super::{Budget, NodeStats, SearchError, SimulationPolicy, TreeConfig};
use crate::cost::{reward_from_cost, Cost, CostEvaluator, RewardScale};
use crate::domain::{Action, PartialSchedule};

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub struct SearchNode {
    state: PartialSchedule,
    action: Option<Action>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    /// `None` until the node is first expanded.
    untried: Option<Vec<Action>>,
    stats: NodeStats,
}

impl SearchNode {
    fn new(state: PartialSchedule, action: Option<Action>, parent: Option<NodeId>) -> Self {
        SearchNode {
            state,
            action,
            parent,
            children: Vec::new(),
            untried: None,
            stats: NodeStats::default(),
        }
    }

    pub fn state(&self) -> &PartialSchedule {
        &self.state
    }

    /// The action leading here from the parent; `None` at the root.
    pub fn action(&self) -> Option<&Action> {
        self.action.as_ref()
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    /// Untried actions remain (or the node was never expanded).
    pub fn has_untried(&self) -> bool {
        !self.state.is_terminal() && self.untried.as_ref().is_none_or(|u| !u.is_empty())
    }
}

/// Result of one root decision.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeOutcome {
    pub best_schedule: PartialSchedule,
    pub best_cost: Cost,
    pub winner_action: Action,
    pub iterations_run: u64,
}

/// One search tree. Nodes live in an arena indexed by [`NodeId`]; the root
/// is always node 0.
pub struct SearchTree {
    config: TreeConfig,
    evaluator: Arc<dyn CostEvaluator>,
    rng: ChaCha8Rng,
    nodes: Vec<SearchNode>,
    scale: Option<RewardScale>,
}

impl std::fmt::Debug for SearchTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SearchTree")
            .field("config", &self.config)
            .field("evaluator", &self.evaluator.name())
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

const ROOT: NodeId = 0;

impl SearchTree {
    pub fn new(
        root: PartialSchedule,
        config: TreeConfig,
        evaluator: Arc<dyn CostEvaluator>,
        seed: u64,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        Ok(SearchTree {
            config,
            evaluator,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: vec![SearchNode::new(root, None, None)],
            scale: None,
        })
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn evaluator(&self) -> &Arc<dyn CostEvaluator> {
        &self.evaluator
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    pub fn root_state(&self) -> &PartialSchedule {
        &self.nodes[ROOT].state
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The reward anchor: the cost of the first complete schedule this tree
    /// simulated. Fixed for the tree's lifetime.
    pub fn reward_scale(&self) -> Option<RewardScale> {
        self.scale
    }

    /// Descends from the root by maximum UCB score, stopping at a node with
    /// untried actions or at a terminal node.
    pub fn select(&mut self) -> Result<Vec<NodeId>, SearchError> {
        let mut path = vec![ROOT];
        let mut id = ROOT;
        loop {
            let node = &self.nodes[id];
            if node.state.is_terminal() || node.has_untried() {
                return Ok(path);
            }
            let ln_n = (node.stats.visits as f64).ln();
            let mut best = f64::NEG_INFINITY;
            let mut ties: Vec<NodeId> = Vec::new();
            for &c in &node.children {
                let stats = &self.nodes[c].stats;
                if stats.visits == 0 {
                    return Err(SearchError::ZeroVisitChild);
                }
                let score = score_with_ln(stats, ln_n, self.config.ucb);
                if score > best {
                    best = score;
                    ties.clear();
                    ties.push(c);
                } else if score == best {
                    ties.push(c);
                }
            }
            id = match ties.len() {
                0 => return Err(SearchError::NoChildren),
                1 => ties[0],
                k => ties[self.rng.random_range(0..k)],
            };
            path.push(id);
        }
    }

    /// Adds one uniformly random untried child of `id`.
    pub fn expand(&mut self, id: NodeId) -> Result<NodeId, SearchError> {
        self.ensure_untried(id)?;
        let untried = self.nodes[id].untried.as_mut().expect("initialized above");
        if untried.is_empty() {
            return Err(SearchError::FullyExpanded);
        }
        let k = self.rng.random_range(0..untried.len());
        let action = untried.swap_remove(k);
        Ok(self.push_child(id, action))
    }

    /// Adds the child reached by `action` without touching statistics.
    /// Used to build trees with prescribed statistics.
    #[doc(hidden)]
    pub fn insert_child(&mut self, id: NodeId, action: Action) -> Result<NodeId, SearchError> {
        self.ensure_untried(id)?;
        let untried = self.nodes[id].untried.as_mut().expect("initialized above");
        match untried.iter().position(|a| *a == action) {
            Some(k) => {
                untried.swap_remove(k);
                Ok(self.push_child(id, action))
            }
            None => Err(SearchError::FullyExpanded),
        }
    }

    #[doc(hidden)]
    pub fn stats_mut(&mut self, id: NodeId) -> &mut NodeStats {
        &mut self.nodes[id].stats
    }

    fn ensure_untried(&mut self, id: NodeId) -> Result<(), SearchError> {
        let node = &mut self.nodes[id];
        if node.untried.is_none() {
            node.untried = Some(if node.state.is_terminal() {
                Vec::new()
            } else {
                node.state.enumerate_actions()?
            });
        }
        Ok(())
    }

    fn push_child(&mut self, parent: NodeId, action: Action) -> NodeId {
        let state = self.nodes[parent].state.apply_unchecked(&action);
        let id = self.nodes.len();
        self.nodes.push(SearchNode::new(state, Some(action), Some(parent)));
        self.nodes[parent].children.push(id);
        id
    }

    /// Records one simulation result along `path` (root first). The last
    /// node of the path is the one the simulation started from.
    pub fn backpropagate(&mut self, path: &[NodeId], cost: Cost, terminal: &PartialSchedule) {
        let scale = *self.scale.get_or_insert(RewardScale::new(cost));
        let reward = reward_from_cost(cost, scale);
        let binary = self.config.ucb.uses_binary_reward();
        let mut parent_best = f64::INFINITY;
        for (i, &id) in path.iter().enumerate() {
            let stats = &mut self.nodes[id].stats;
            let prior_best = stats.best_cost;
            stats.visits += 1;
            stats.cost_sum += cost.ms();
            stats.reward_sum += reward;
            if binary && i > 0 && cost.ms() < parent_best {
                stats.win_sum += 1.0;
            }
            if cost.ms() < stats.best_cost {
                stats.best_cost = cost.ms();
                stats.best_schedule = Some(terminal.clone());
            }
            parent_best = prior_best;
        }
        if let Some(&last) = path.last() {
            self.nodes[last].stats.self_simulations += 1;
        }
    }

    /// One select, expand, simulate, backpropagate cycle.
    pub fn iterate(&mut self) -> Result<(), SearchError> {
        let mut path = self.select()?;
        let leaf = *path.last().expect("path starts at the root");
        let start = if self.nodes[leaf].state.is_terminal() {
            leaf
        } else {
            let child = self.expand(leaf)?;
            path.push(child);
            child
        };
        let (terminal, cost) = simulate(
            &self.nodes[start].state,
            self.config.simulation,
            &*self.evaluator,
            &mut self.rng,
        )?;
        self.backpropagate(&path, cost, &terminal);
        Ok(())
    }

    /// Iterates until the budget runs out (at least once), then picks the
    /// root's winning child.
    pub fn run_root_decision(&mut self) -> Result<TreeOutcome, SearchError> {
        if self.root_state().is_terminal() {
            return Err(SearchError::Domain(crate::domain::DomainError::TerminalState));
        }
        let started = Instant::now();
        let mut iterations = 0u64;
        loop {
            self.iterate()?;
            iterations += 1;
            let done = match self.config.budget {
                Budget::Iterations(n) => iterations >= n,
                Budget::WallClock(d) => started.elapsed() >= d,
            };
            if done {
                break;
            }
        }
        let winner = self.winner_child(ROOT)?;
        let w = &self.nodes[winner];
        Ok(TreeOutcome {
            best_schedule: w.stats.best_schedule.clone().ok_or(SearchError::NoChildren)?,
            best_cost: Cost::new(w.stats.best_cost)?,
            winner_action: w.action.expect("children carry actions"),
            iterations_run: iterations,
        })
    }

    /// The child of `id` with the lowest best cost.
    pub fn pick_winner(&self, id: NodeId) -> Result<Action, SearchError> {
        let w = self.winner_child(id)?;
        Ok(self.nodes[w].action.expect("children carry actions"))
    }

    fn winner_child(&self, id: NodeId) -> Result<NodeId, SearchError> {
        let children = &self.nodes[id].children;
        let candidates: Vec<(Action, &NodeStats)> = children
            .iter()
            .map(|&c| {
                (
                    self.nodes[c].action.expect("children carry actions"),
                    &self.nodes[c].stats,
                )
            })
            .collect();
        pick_winner_among(&candidates).map(|k| children[k])
    }

    /// Moves the root to `state`. With subtree reuse, a child of the current
    /// root holding that state keeps its statistics; otherwise the tree
    /// restarts empty. The reward anchor and generator carry over.
    pub fn reroot(&mut self, state: PartialSchedule) {
        let keep = if self.config.reuse_subtree {
            self.nodes[ROOT]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].state == state)
        } else {
            None
        };
        match keep {
            Some(child) => self.compact(child),
            None => self.nodes = vec![SearchNode::new(state, None, None)],
        }
    }

    fn compact(&mut self, new_root: NodeId) {
        let mut old: Vec<Option<SearchNode>> = std::mem::take(&mut self.nodes).into_iter().map(Some).collect();
        let mut remap = vec![usize::MAX; old.len()];
        let mut order = vec![new_root];
        let mut k = 0;
        while k < order.len() {
            let id = order[k];
            remap[id] = k;
            order.extend_from_slice(&old[id].as_ref().expect("tree nodes form a tree").children);
            k += 1;
        }
        for &id in &order {
            let mut node = old[id].take().expect("visited once");
            node.parent = node.parent.filter(|_| id != new_root).map(|p| remap[p]);
            if id == new_root {
                node.action = None;
            }
            for c in &mut node.children {
                *c = remap[*c];
            }
            self.nodes.push(node);
        }
    }
}

/// Index of the winner among root children: lowest best cost, then more
/// visits, then canonical action order. Unvisited children never win.
pub fn pick_winner_among(children: &[(Action, &NodeStats)]) -> Result<usize, SearchError> {
    children
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| s.visits > 0)
        .min_by(|(_, (a, x)), (_, (b, y))| {
            x.best_cost
                .total_cmp(&y.best_cost)
                .then(y.visits.cmp(&x.visits))
                .then(a.cmp(b))
        })
        .map(|(k, _)| k)
        .ok_or(SearchError::NoChildren)
}

/// Completes `start` to a terminal schedule and returns it with its cost.
pub fn simulate<R: Rng + ?Sized>(
    start: &PartialSchedule,
    policy: SimulationPolicy,
    evaluator: &dyn CostEvaluator,
    rng: &mut R,
) -> Result<(PartialSchedule, Cost), SearchError> {
    match policy {
        SimulationPolicy::UniformRandom => {
            let terminal = start.random_completion(rng);
            let cost = evaluator.evaluate(&terminal)?;
            Ok((terminal, cost))
        }
        SimulationPolicy::PureGreedy => {
            if start.is_terminal() {
                let cost = evaluator.evaluate(start)?;
                return Ok((start.clone(), cost));
            }
            let mut state = start.clone();
            let mut last = None;
            while !state.is_terminal() {
                let mut best: Option<(Action, Cost)> = None;
                for a in state.enumerate_actions()? {
                    let cost = evaluator.evaluate(&state.apply_unchecked(&a).default_completed())?;
                    if best.is_none_or(|(_, c)| cost.ms() < c.ms()) {
                        best = Some((a, cost));
                    }
                }
                let (a, cost) = best.expect("non-terminal states have actions");
                state = state.apply_unchecked(&a);
                last = Some(cost);
            }
            Ok((state, last.expect("at least one step taken")))
        }
    }
}
