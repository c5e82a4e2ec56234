use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::Rng;

use super::decision::{Action, SchedulingDecision};
use super::pipeline::Pipeline;
use super::DomainError;

/// Default cap on the number of schedules `enumerate_all_schedules` accepts.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// An MDP state: the decisions committed so far, in scheduling order.
///
/// States are immutable values; transitions return new states.
#[derive(Clone, Debug)]
pub struct PartialSchedule {
    pipeline: Arc<Pipeline>,
    decisions: Vec<SchedulingDecision>,
}

impl PartialEq for PartialSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.decisions == other.decisions
            && (Arc::ptr_eq(&self.pipeline, &other.pipeline) || self.pipeline == other.pipeline)
    }
}

impl Eq for PartialSchedule {}

impl Hash for PartialSchedule {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.decisions.hash(state);
    }
}

impl PartialSchedule {
    /// The empty schedule with the cursor on the output stage.
    pub fn initial(p: &Arc<Pipeline>) -> Self {
        PartialSchedule {
            pipeline: Arc::clone(p),
            decisions: Vec::with_capacity(p.stages().len()),
        }
    }

    pub fn pipeline(&self) -> &Arc<Pipeline> {
        &self.pipeline
    }

    /// Decisions in scheduling order (output stage first).
    pub fn decisions(&self) -> &[SchedulingDecision] {
        &self.decisions
    }

    /// Position in the scheduling order of the next stage to decide.
    pub fn cursor(&self) -> usize {
        self.decisions.len()
    }

    /// Stage index under the cursor, `None` when terminal.
    pub fn cursor_stage(&self) -> Option<usize> {
        self.pipeline.schedule_order().get(self.decisions.len()).copied()
    }

    pub fn remaining(&self) -> usize {
        self.pipeline.stages().len() - self.decisions.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.decisions.len() == self.pipeline.stages().len()
    }

    /// The decision recorded for a stage, if any.
    pub fn decision_for(&self, stage: usize) -> Option<&SchedulingDecision> {
        self.decisions.iter().find(|d| d.stage == stage)
    }

    fn cursor_or_err(&self) -> Result<usize, DomainError> {
        self.cursor_stage().ok_or(DomainError::TerminalState)
    }

    /// Number of legal actions at the cursor.
    pub fn action_count(&self) -> Result<usize, DomainError> {
        Ok(self.pipeline.action_count(self.cursor_or_err()?))
    }

    /// Every legal action at the cursor, in canonical order.
    pub fn enumerate_actions(&self) -> Result<Vec<Action>, DomainError> {
        let stage = self.cursor_or_err()?;
        Ok(self.pipeline.space(stage).enumerate(stage))
    }

    /// A uniformly random legal action, drawn without building the action list.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Action, DomainError> {
        let stage = self.cursor_or_err()?;
        Ok(self.pipeline.space(stage).sample(stage, rng))
    }

    /// Records `action` for the cursor stage and advances the cursor.
    pub fn apply(&self, action: &Action) -> Result<PartialSchedule, DomainError> {
        let stage = self.cursor_or_err()?;
        if action.stage != stage {
            return Err(DomainError::IllegalAction(format!(
                "action targets stage `{}` but the cursor is on `{}`",
                self.pipeline.stages().get(action.stage).map_or("?", |s| s.id.as_str()),
                self.pipeline.stage(stage).id
            )));
        }
        self.pipeline.check_decision(action)?;
        let mut decisions = Vec::with_capacity(self.pipeline.stages().len());
        decisions.extend_from_slice(&self.decisions);
        decisions.push(*action);
        Ok(PartialSchedule {
            pipeline: Arc::clone(&self.pipeline),
            decisions,
        })
    }

    /// Applies an action known to come from this state's legal set.
    pub(crate) fn apply_unchecked(&self, action: &Action) -> PartialSchedule {
        debug_assert!(self.pipeline.check_decision(action).is_ok());
        debug_assert_eq!(Some(action.stage), self.cursor_stage());
        let mut decisions = Vec::with_capacity(self.pipeline.stages().len());
        decisions.extend_from_slice(&self.decisions);
        decisions.push(*action);
        PartialSchedule {
            pipeline: Arc::clone(&self.pipeline),
            decisions,
        }
    }

    /// Completes the schedule by giving every undecided stage its default
    /// decision (whole-extent tile, root, no parallel/vector/unroll).
    pub fn default_completed(&self) -> PartialSchedule {
        let order = self.pipeline.schedule_order();
        let mut decisions = self.decisions.clone();
        decisions.extend(
            order[self.decisions.len()..]
                .iter()
                .map(|&s| self.pipeline.default_decision(s)),
        );
        PartialSchedule {
            pipeline: Arc::clone(&self.pipeline),
            decisions,
        }
    }

    /// Completes the schedule with uniformly random actions.
    pub fn random_completion<R: Rng + ?Sized>(&self, rng: &mut R) -> PartialSchedule {
        let mut decisions = self.decisions.clone();
        for &stage in &self.pipeline.schedule_order()[self.decisions.len()..] {
            decisions.push(self.pipeline.space(stage).sample(stage, rng));
        }
        PartialSchedule {
            pipeline: Arc::clone(&self.pipeline),
            decisions,
        }
    }

    /// Rebuilds a state by replaying decisions from the initial state.
    pub fn replay(p: &Arc<Pipeline>, decisions: &[SchedulingDecision]) -> Result<PartialSchedule, DomainError> {
        decisions
            .iter()
            .try_fold(PartialSchedule::initial(p), |s, d| s.apply(d))
    }
}

/// Iterator over every terminal schedule of a pipeline, in canonical
/// (lexicographic by scheduling order) sequence.
pub struct AllSchedules {
    pipeline: Arc<Pipeline>,
    actions: Vec<Vec<Action>>,
    odometer: Vec<usize>,
    done: bool,
}

impl Iterator for AllSchedules {
    type Item = PartialSchedule;

    fn next(&mut self) -> Option<PartialSchedule> {
        if self.done {
            return None;
        }
        let decisions = self
            .odometer
            .iter()
            .zip(&self.actions)
            .map(|(&i, list)| list[i])
            .collect();
        // Advance the last position first so the sequence is lexicographic.
        let mut pos = self.odometer.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.odometer[pos] += 1;
            if self.odometer[pos] < self.actions[pos].len() {
                break;
            }
            self.odometer[pos] = 0;
        }
        Some(PartialSchedule {
            pipeline: Arc::clone(&self.pipeline),
            decisions,
        })
    }
}

/// Enumerates every terminal schedule, refusing spaces larger than `cap`.
pub fn enumerate_all_schedules(p: &Arc<Pipeline>, cap: u128) -> Result<AllSchedules, DomainError> {
    let size = p.schedule_space_size();
    if size > cap {
        return Err(DomainError::SpaceTooLarge { size, cap });
    }
    let actions: Vec<Vec<Action>> = p.schedule_order().iter().map(|&s| p.space(s).enumerate(s)).collect();
    Ok(AllSchedules {
        pipeline: Arc::clone(p),
        odometer: vec![0; actions.len()],
        actions,
        done: false,
    })
}
