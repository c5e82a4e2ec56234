//! The loop-nest pipeline language and the scheduling MDP over it.

mod decision;
mod pipeline;
mod state;
mod text;

pub use decision::{Action, Granularity, SchedulingDecision, UNROLL_FACTORS, VECTORIZE_FACTORS};
pub use pipeline::{Pipeline, Stage, MAX_EXTENT, MIN_EXTENT};
pub use state::{enumerate_all_schedules, AllSchedules, PartialSchedule, DEFAULT_ENUMERATION_CAP};
pub use text::{format_decision, format_pipeline, format_schedule, load_pipeline, load_schedule, parse_decision};

pub(crate) use text::tokens;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("pipeline graph has a cycle through stage `{0}`")]
    Cycle(String),
    #[error("stage `{stage}`: extent {extent} is not a power of two in [4, 4096]")]
    ExtentOutOfRange { stage: String, extent: u32 },
    #[error("invalid pipeline: {0}")]
    Invalid(String),
    #[error("no actions: the schedule is already complete")]
    TerminalState,
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("schedule space has {size} schedules, above the cap of {cap}")]
    SpaceTooLarge { size: u128, cap: u128 },
}
