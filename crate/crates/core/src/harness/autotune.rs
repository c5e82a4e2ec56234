use std::sync::Arc;
use std::time::{Duration, Instant};

use super::presets::{run_preset, Preset, RunOptions};
use super::HarnessError;
use crate::cost::{execute_schedule, CostModelConfig, ExecConfig};
use crate::domain::{PartialSchedule, Pipeline};
use crate::seed::derive_seed;

#[derive(Clone, Debug)]
pub struct AutotuneRun {
    pub seed: u64,
    pub schedule: PartialSchedule,
    pub model_cost_ms: f64,
    pub measured_ms: f64,
    pub wall: Duration,
}

#[derive(Clone, Debug)]
pub struct AutotuneResult {
    pub best: PartialSchedule,
    pub best_measured_ms: f64,
    pub runs: Vec<AutotuneRun>,
}

/// Reruns `preset` with fresh seeds until `budget` has elapsed (the run in
/// flight when it expires finishes), measures every result, and keeps the
/// fastest.
pub fn autotune(
    pipeline: &Arc<Pipeline>,
    model: &CostModelConfig,
    preset: &Preset,
    budget: Duration,
    base_seed: u64,
    options: &RunOptions,
) -> Result<AutotuneResult, HarnessError> {
    if budget.is_zero() {
        return Err(HarnessError::Validation("autotune budget must be > 0".into()));
    }
    let started = Instant::now();
    let mut runs: Vec<AutotuneRun> = Vec::new();
    let mut best: Option<usize> = None;
    for k in 0.. {
        let seed = derive_seed(base_seed, k);
        let out = run_preset(preset, pipeline, model, seed, options)?;
        let measured_ms = match out.measured_ms {
            Some(m) => m,
            None => execute_schedule(&out.schedule, options.measurement_repeats, &ExecConfig::default())?.ms(),
        };
        log::info!("autotune run {k}: {measured_ms:.6} ms measured");
        if best.is_none_or(|b| measured_ms < runs[b].measured_ms) {
            best = Some(runs.len());
        }
        runs.push(AutotuneRun {
            seed,
            schedule: out.schedule,
            model_cost_ms: out.model_cost_ms,
            measured_ms,
            wall: out.wall,
        });
        if started.elapsed() >= budget {
            break;
        }
    }
    let b = &runs[best.expect("at least one run")];
    Ok(AutotuneResult {
        best: b.schedule.clone(),
        best_measured_ms: b.measured_ms,
        runs,
    })
}
