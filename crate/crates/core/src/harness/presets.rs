use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::HarnessError;
use crate::baselines::{beam_search, brute_force, greedy_search, random_search, BeamConfig, RandomBudget};
use crate::cost::{analytical_cost, AnalyticalModel, CostEvaluator, CostModelConfig, Measurement, NoisyModel};
use crate::domain::{PartialSchedule, Pipeline};
use crate::ensemble::{Ensemble, EnsembleConfig, EnsembleTrace, RootSelection};
use crate::mcts::{Budget, SimulationPolicy, TreeConfig, UcbVariant};
use crate::seed::derive_seed;

/// Which oracle drives the search, and what is reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evaluation {
    /// Analytical model only.
    Model,
    /// Analytical model with frozen log-normal noise of the given sigma.
    ModelNoise(f64),
    /// Interpreted execution for every evaluation.
    Real,
    /// Search on the model; roots and final schedules are measured.
    ModelReal,
}

impl Evaluation {
    /// Whether result rows are compared on measured time.
    pub fn measures(&self) -> bool {
        matches!(self, Evaluation::Real | Evaluation::ModelReal)
    }
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evaluation::Model => f.write_str("model"),
            Evaluation::ModelNoise(s) => write!(f, "model+noise({s})"),
            Evaluation::Real => f.write_str("real"),
            Evaluation::ModelReal => f.write_str("model+real"),
        }
    }
}

impl FromStr for Evaluation {
    type Err = HarnessError;

    /// `model`, `model+noise:<sigma>`, `real` or `model+real`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(Evaluation::Model),
            "real" => Ok(Evaluation::Real),
            "model+real" => Ok(Evaluation::ModelReal),
            _ => {
                let sigma = s
                    .strip_prefix("model+noise:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| HarnessError::Validation(format!("unknown evaluator `{s}`")))?;
                Ok(Evaluation::ModelNoise(sigma))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlgorithmKind {
    Mcts {
        ucb: UcbVariant,
        root_selection: RootSelection,
        /// Per root decision, at the original scale.
        full_budget: Duration,
    },
    Beam {
        beam_size: usize,
        passes: usize,
        parallel_restarts: usize,
    },
    Greedy,
    Random {
        full_budget: Duration,
    },
    BruteForce,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub kind: AlgorithmKind,
}

/// Budgets are divided by this factor unless full budgets are asked
/// for.
pub const DESK_SCALE: u32 = 10;

const SQRT2: f64 = std::f64::consts::SQRT_2;

const fn mcts(name: &'static str, ucb: UcbVariant, root_selection: RootSelection, ms: u64) -> Preset {
    Preset {
        name,
        kind: AlgorithmKind::Mcts {
            ucb,
            root_selection,
            full_budget: Duration::from_millis(ms),
        },
    }
}

const MULT1: UcbVariant = UcbVariant::InverseAvgMultiplicative { c_mult: 1.0 };

pub const PRESETS: &[Preset] = &[
    mcts("mcts_30s", MULT1, RootSelection::ByCost, 30_000),
    mcts("mcts_10s", MULT1, RootSelection::ByCost, 10_000),
    mcts("mcts_1s", MULT1, RootSelection::ByCost, 1_000),
    mcts(
        "mcts_Cp10_30s",
        UcbVariant::InverseAvgMultiplicative { c_mult: 10.0 },
        RootSelection::ByCost,
        30_000,
    ),
    mcts(
        "mcts_sqrt2_30s",
        UcbVariant::AvgInverseAdditive { c_p: SQRT2 },
        RootSelection::ByCost,
        30_000,
    ),
    mcts("mcts_cost+real_30s", MULT1, RootSelection::ByRealMeasurement, 30_000),
    mcts("mcts_cost+real_1s", MULT1, RootSelection::ByRealMeasurement, 1_000),
    mcts("mcts_0.5s", MULT1, RootSelection::ByCost, 500),
    mcts("adaptive_cp", UcbVariant::AdaptiveCp, RootSelection::ByCost, 10_000),
    mcts(
        "binary_reward",
        UcbVariant::BinaryReward { c_p: SQRT2 },
        RootSelection::ByCost,
        10_000,
    ),
    Preset {
        name: "beam_halide",
        kind: AlgorithmKind::Beam {
            beam_size: 32,
            passes: 5,
            parallel_restarts: 16,
        },
    },
    Preset {
        name: "greedy",
        kind: AlgorithmKind::Greedy,
    },
    Preset {
        name: "random",
        kind: AlgorithmKind::Random {
            full_budget: Duration::from_secs(600),
        },
    },
    Preset {
        name: "brute_force",
        kind: AlgorithmKind::BruteForce,
    },
];

pub fn preset(name: &str) -> Result<Preset, HarnessError> {
    PRESETS
        .iter()
        .copied()
        .find(|p| p.name == name)
        .ok_or_else(|| HarnessError::Validation(format!("unknown algorithm preset `{name}`")))
}

/// All presets that run the tree ensemble.
pub fn mcts_presets() -> impl Iterator<Item = Preset> {
    PRESETS.iter().copied().filter(Preset::is_mcts)
}

impl Preset {
    pub fn is_mcts(&self) -> bool {
        matches!(self.kind, AlgorithmKind::Mcts { .. })
    }

    /// Budget per root decision (MCTS) or per run (random).
    pub fn budget(&self, full_scale: bool) -> Option<Duration> {
        let d = match self.kind {
            AlgorithmKind::Mcts { full_budget, .. } | AlgorithmKind::Random { full_budget } => full_budget,
            _ => return None,
        };
        Some(if full_scale { d } else { d / DESK_SCALE })
    }

    /// The tree settings of an MCTS preset with the given budget.
    pub fn tree_config(&self, budget: Budget) -> Option<TreeConfig> {
        match self.kind {
            AlgorithmKind::Mcts { ucb, .. } => Some(TreeConfig::new(ucb, SimulationPolicy::UniformRandom, budget)),
            _ => None,
        }
    }
}

/// Knobs shared by every run of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub evaluation: Evaluation,
    pub full_scale: bool,
    /// Replaces the preset budget: per root decision for MCTS, per run for
    /// random search (iterations count candidates).
    pub budget: Option<Budget>,
    pub standard_trees: usize,
    pub greedy_trees: usize,
    pub workers: usize,
    pub reuse_subtree: bool,
    pub measurement_repeats: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            evaluation: Evaluation::Model,
            full_scale: false,
            budget: None,
            standard_trees: 15,
            greedy_trees: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            reuse_subtree: false,
            measurement_repeats: 5,
        }
    }
}

/// What one algorithm run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub schedule: PartialSchedule,
    /// Analytical cost of `schedule` under the pipeline's model constants.
    pub model_cost_ms: f64,
    pub measured_ms: Option<f64>,
    /// Tree iterations, evaluator calls or random candidates.
    pub iterations: u64,
    pub wall: Duration,
    pub trace: Option<EnsembleTrace>,
}

fn search_evaluator(options: &RunOptions, model: &CostModelConfig, seed: u64) -> Arc<dyn CostEvaluator> {
    let measurement = Measurement {
        repeats: options.measurement_repeats,
        ..Measurement::default()
    };
    match options.evaluation {
        Evaluation::Model | Evaluation::ModelReal => Arc::new(AnalyticalModel::new(model.clone())),
        Evaluation::ModelNoise(sigma) => Arc::new(NoisyModel {
            config: model.clone(),
            sigma,
            seed: derive_seed(seed, 0x6e6f),
        }),
        Evaluation::Real => Arc::new(measurement),
    }
}

/// Runs one preset once.
pub fn run_preset(
    preset: &Preset,
    pipeline: &Arc<Pipeline>,
    model: &CostModelConfig,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutcome, HarnessError> {
    let started = Instant::now();
    let evaluator = search_evaluator(options, model, seed);
    let measurer = Measurement {
        repeats: options.measurement_repeats,
        ..Measurement::default()
    };
    let mut measured_ms = None;
    let mut trace = None;
    let (schedule, iterations) = match preset.kind {
        AlgorithmKind::Mcts { root_selection, .. } => {
            let budget = options
                .budget
                .unwrap_or_else(|| Budget::WallClock(preset.budget(options.full_scale).expect("mcts budget")));
            let mut tree = preset.tree_config(budget).expect("mcts preset");
            tree.reuse_subtree = options.reuse_subtree;
            let root_selection = if options.evaluation == Evaluation::ModelReal {
                RootSelection::ByRealMeasurement
            } else {
                root_selection
            };
            let cfg = EnsembleConfig {
                standard_trees: options.standard_trees,
                greedy_trees: options.greedy_trees,
                tree,
                root_selection,
                measurement_repeats: options.measurement_repeats,
                seed,
                workers: options.workers,
            };
            let t = Ensemble::new(pipeline, cfg, evaluator)?.run()?;
            measured_ms = t.final_measured_ms;
            let iterations = t.total_iterations();
            let s = t.final_schedule.clone();
            trace = Some(t);
            (s, iterations)
        }
        AlgorithmKind::Beam {
            beam_size,
            passes,
            parallel_restarts,
        } => {
            let cfg = BeamConfig {
                beam_size,
                passes,
                parallel_restarts,
                seed,
            };
            let r = beam_search(pipeline, &cfg, &*evaluator)?;
            (r.schedule, r.evaluations)
        }
        AlgorithmKind::Greedy => {
            let r = greedy_search(pipeline, &*evaluator, seed)?;
            (r.schedule, r.evaluations)
        }
        AlgorithmKind::Random { .. } => {
            let budget = match options.budget {
                Some(Budget::Iterations(n)) => RandomBudget::Candidates(n),
                Some(Budget::WallClock(d)) => RandomBudget::Time(d),
                None => RandomBudget::Time(preset.budget(options.full_scale).expect("random budget")),
            };
            let r = random_search(pipeline, budget, &measurer, seed)?;
            measured_ms = Some(r.cost.ms());
            (r.schedule, r.evaluations)
        }
        AlgorithmKind::BruteForce => {
            let r = brute_force(pipeline, &*evaluator)?;
            (r.schedule, r.evaluations)
        }
    };
    if options.evaluation.measures() && measured_ms.is_none() {
        measured_ms = Some(measurer.evaluate(&schedule)?.ms());
    }
    let model_cost_ms = analytical_cost(&schedule, model)?.ms();
    Ok(RunOutcome {
        schedule,
        model_cost_ms,
        measured_ms,
        iterations,
        wall: started.elapsed(),
        trace,
    })
}
