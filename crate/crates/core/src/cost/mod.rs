//! Cost oracles: the analytical model, the interpreter-backed measurement,
//! and reward shaping.

mod config;
mod evaluator;
mod interp;
mod model;

pub use config::CostModelConfig;
pub use evaluator::{AnalyticalModel, CostEvaluator, CountingEvaluator, Measurement, NoisyModel};
pub use interp::{execute_once, execute_schedule, ExecConfig, Execution};
pub use model::{analytical_cost, cost_breakdown, noisy_cost, CostBreakdown, StageCost};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("cost is only defined for complete schedules")]
    NonTerminal,
    #[error("invalid cost value {0}")]
    InvalidCost(f64),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("buffers need {needed} bytes, above the cap of {cap}")]
    BufferOverflow { needed: u64, cap: u64 },
    #[error("cost config line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Execution time in milliseconds; finite and strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Cost(f64);

impl Cost {
    pub fn new(ms: f64) -> Result<Self, CostError> {
        if ms.is_finite() && ms > 0.0 {
            Ok(Cost(ms))
        } else {
            Err(CostError::InvalidCost(ms))
        }
    }

    pub fn ms(self) -> f64 {
        self.0
    }

    /// Total order over costs (they are never NaN).
    pub fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ms", self.0)
    }
}

/// Normalization anchor for rewards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardScale {
    reference_ms: f64,
}

impl RewardScale {
    pub fn new(reference: Cost) -> Self {
        RewardScale {
            reference_ms: reference.ms(),
        }
    }

    pub fn reference(&self) -> Cost {
        Cost(self.reference_ms)
    }
}

/// `reference / max(cost, reference)`: 1 at or below the reference,
/// decreasing above it, always in (0, 1].
pub fn reward_from_cost(cost: Cost, scale: RewardScale) -> f64 {
    scale.reference_ms / cost.0.max(scale.reference_ms)
}
