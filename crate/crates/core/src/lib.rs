//! Schedule search for miniature loop-nest pipelines.
//!
//! A pipeline is a DAG of two-loop stages. Scheduling it is a Markov
//! decision process that decides one stage at a time, from the output back
//! to the inputs. This crate searches that process with an ensemble of Monte
//! Carlo trees (plus beam, greedy, random and brute-force baselines) against
//! two cost oracles: a fast analytical model and real, interpreted
//! execution.

pub mod baselines;
pub mod cost;
pub mod domain;
pub mod ensemble;
pub mod harness;
pub mod mcts;
pub mod seed;

pub use baselines::{beam_search, brute_force, greedy_search, random_search, BaselineResult, BeamConfig, RandomBudget};
pub use cost::{Cost, CostError, CostEvaluator, CostModelConfig, RewardScale};
pub use domain::{Action, DomainError, Granularity, PartialSchedule, Pipeline, SchedulingDecision, Stage};
pub use ensemble::{run_ensemble, Ensemble, EnsembleConfig, EnsembleTrace, RootSelection};
pub use mcts::{Budget, NodeStats, SearchError, SearchTree, SimulationPolicy, TreeConfig, TreeOutcome, UcbVariant};
pub use seed::derive_seed;
