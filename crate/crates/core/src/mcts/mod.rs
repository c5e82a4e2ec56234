//! A single Monte Carlo search tree over the scheduling MDP.
//!
//! Nodes keep the average cost of the simulations that passed through them
//! (which drives selection) alongside the best cost seen and the complete
//! schedule that achieved it (which drives the final root decision).

mod tree;
mod ucb;

pub use tree::{pick_winner_among, simulate, NodeId, SearchNode, SearchTree, TreeOutcome};
pub use ucb::{ucb_score, ucb_score_at, UcbVariant};

use std::time::Duration;

use thiserror::Error;

use crate::cost::CostError;
use crate::domain::{DomainError, PartialSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("UCB is undefined for a child with zero visits")]
    ZeroVisitChild,
    #[error("inconsistent node statistics: {0}")]
    InvalidStatistics(String),
    #[error("node has no untried actions left")]
    FullyExpanded,
    #[error("root has no visited children")]
    NoChildren,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("budget exhausted before any iteration completed")]
    Budget,
    #[error("every candidate measurement failed")]
    AllMeasurementsFailed,
}

/// Statistics stored on every search node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats {
    /// Simulations that passed through this node.
    pub visits: u64,
    /// Sum of simulated costs, milliseconds.
    pub cost_sum: f64,
    /// Sum of normalized rewards in (0, 1].
    pub reward_sum: f64,
    /// Simulations that beat the parent's best cost (binary reward mode).
    pub win_sum: f64,
    /// Lowest cost seen through this node; infinite before any visit.
    pub best_cost: f64,
    /// The complete schedule that achieved `best_cost`.
    pub best_schedule: Option<PartialSchedule>,
    /// Simulations launched from this node itself.
    pub self_simulations: u64,
}

impl Default for NodeStats {
    fn default() -> Self {
        NodeStats {
            visits: 0,
            cost_sum: 0.0,
            reward_sum: 0.0,
            win_sum: 0.0,
            best_cost: f64::INFINITY,
            best_schedule: None,
            self_simulations: 0,
        }
    }
}

impl NodeStats {
    pub fn average_cost(&self) -> f64 {
        self.cost_sum / self.visits as f64
    }
}

/// How a simulation completes a partial schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimulationPolicy {
    /// Uniformly random actions until terminal.
    UniformRandom,
    /// At each step, the action whose default-completed schedule the
    /// evaluator scores lowest.
    PureGreedy,
}

/// What ends a root decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Iterations(u64),
    WallClock(Duration),
}

impl Budget {
    pub fn validate(&self) -> Result<(), SearchError> {
        let positive = match self {
            Budget::Iterations(n) => *n > 0,
            Budget::WallClock(d) => !d.is_zero(),
        };
        if positive {
            Ok(())
        } else {
            Err(SearchError::InvalidConfig("budget must be > 0".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeConfig {
    pub ucb: UcbVariant,
    pub simulation: SimulationPolicy,
    /// Per root decision.
    pub budget: Budget,
    /// Keep the adopted child's subtree (and its statistics) across root
    /// decisions instead of starting a fresh tree.
    pub reuse_subtree: bool,
}

impl TreeConfig {
    pub fn new(ucb: UcbVariant, simulation: SimulationPolicy, budget: Budget) -> Self {
        TreeConfig {
            ucb,
            simulation,
            budget,
            reuse_subtree: false,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        self.ucb.validate()?;
        self.budget.validate()
    }
}
