//! Fixtures, named algorithm presets, experiment runs and reports.

mod autotune;
mod experiment;
mod fixtures;
mod presets;
mod report;

pub use autotune::{autotune, AutotuneResult, AutotuneRun};
pub use experiment::{
    run_experiment, AlgorithmEntry, ExperimentSpec, Metric, PipelineEntry, ResultRow, RowKind, RowStatus, ALL_PIPELINES,
};
pub use fixtures::{all_fixtures, build_deceptive_fixture, fixture, fixture_source, Fixture, FIXTURE_NAMES};
pub use presets::{
    mcts_presets, preset, run_preset, AlgorithmKind, Evaluation, Preset, RunOptions, RunOutcome, DESK_SCALE, PRESETS,
};
pub use report::{emit_report, parse_report, summary_table, write_report, REPORT_COLUMNS};

use thiserror::Error;

use crate::cost::CostError;
use crate::domain::DomainError;
use crate::mcts::SearchError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Whether the input, rather than the run, was at fault.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Validation(_) | HarnessError::Parse { .. } | HarnessError::Domain(_) => true,
            HarnessError::Cost(e) => matches!(e, CostError::Config { .. } | CostError::NonTerminal),
            HarnessError::Search(e) => matches!(e, SearchError::InvalidConfig(_) | SearchError::Domain(_)),
            HarnessError::Io(_) | HarnessError::Csv(_) => false,
        }
    }
}
