use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{analytical_cost, execute_schedule, noisy_cost, Cost, CostError, CostModelConfig, ExecConfig};
use crate::domain::PartialSchedule;

/// Scores complete schedules. Partial schedules are always rejected.
pub trait CostEvaluator: Send + Sync {
    fn evaluate(&self, schedule: &PartialSchedule) -> Result<Cost, CostError>;

    /// True when costs come from timing real executions.
    fn is_measurement(&self) -> bool {
        false
    }

    fn name(&self) -> &str;
}

/// The analytical model as an evaluator.
#[derive(Clone, Debug, Default)]
pub struct AnalyticalModel {
    pub config: CostModelConfig,
}

impl AnalyticalModel {
    pub fn new(config: CostModelConfig) -> Self {
        AnalyticalModel { config }
    }
}

impl CostEvaluator for AnalyticalModel {
    fn evaluate(&self, schedule: &PartialSchedule) -> Result<Cost, CostError> {
        analytical_cost(schedule, &self.config)
    }

    fn name(&self) -> &str {
        "model"
    }
}

/// The analytical model with log-normal noise frozen per schedule: the
/// noise draw is seeded from `(seed, schedule)`, so re-evaluating a schedule
/// returns the same cost.
#[derive(Clone, Debug)]
pub struct NoisyModel {
    pub config: CostModelConfig,
    pub sigma: f64,
    pub seed: u64,
}

impl CostEvaluator for NoisyModel {
    fn evaluate(&self, schedule: &PartialSchedule) -> Result<Cost, CostError> {
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        schedule.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        noisy_cost(schedule, &self.config, self.sigma, &mut rng)
    }

    fn name(&self) -> &str {
        "model+noise"
    }
}

/// Real execution through the interpreter.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub repeats: u32,
    pub exec: ExecConfig,
}

impl Default for Measurement {
    fn default() -> Self {
        Measurement {
            repeats: 5,
            exec: ExecConfig::default(),
        }
    }
}

impl CostEvaluator for Measurement {
    fn evaluate(&self, schedule: &PartialSchedule) -> Result<Cost, CostError> {
        execute_schedule(schedule, self.repeats, &self.exec)
    }

    fn is_measurement(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "real"
    }
}

/// Wraps an evaluator and counts calls.
#[derive(Debug, Default)]
pub struct CountingEvaluator<E> {
    inner: E,
    calls: AtomicU64,
}

impl<E> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        CountingEvaluator {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<E: CostEvaluator> CostEvaluator for CountingEvaluator<E> {
    fn evaluate(&self, schedule: &PartialSchedule) -> Result<Cost, CostError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(schedule)
    }

    fn is_measurement(&self) -> bool {
        self.inner.is_measurement()
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
