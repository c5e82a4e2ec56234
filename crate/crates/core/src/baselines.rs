//! Comparison searches: beam, greedy, random and exhaustive.
//!
//! Beam and greedy score a partial schedule by evaluating its default
//! completion. Equal scores are ordered by a seeded random key per
//! candidate, drawn in enumeration order from a generator derived from
//! `(seed, restart, pass, depth)`, so a beam of width one and greedy search
//! make identical choices.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cost::{Cost, CostEvaluator};
use crate::domain::{enumerate_all_schedules, PartialSchedule, Pipeline, DEFAULT_ENUMERATION_CAP};
use crate::mcts::SearchError;
use crate::seed::derive_seed_path;

/// Outcome of a baseline search.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub schedule: PartialSchedule,
    pub cost: Cost,
    /// Evaluator calls made.
    pub evaluations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub passes: usize,
    pub parallel_restarts: usize,
    pub seed: u64,
}

impl BeamConfig {
    /// Beam of 32, five passes, 16 restarts.
    pub fn halide(seed: u64) -> Self {
        BeamConfig {
            beam_size: 32,
            passes: 5,
            parallel_restarts: 16,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.beam_size == 0 || self.passes == 0 || self.parallel_restarts == 0 {
            return Err(SearchError::InvalidConfig(
                "beam size, passes and restarts must all be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn tie_rng(seed: u64, restart: usize, pass: usize, depth: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed_path(seed, &[restart as u64, pass as u64, depth as u64]))
}

fn partial_score(evaluator: &dyn CostEvaluator, s: &PartialSchedule) -> Result<Cost, SearchError> {
    Ok(evaluator.evaluate(&s.default_completed())?)
}

/// Keeps `a` unless `b` is strictly better.
fn better(a: &Option<BaselineResult>, b: &BaselineResult) -> bool {
    a.as_ref().is_none_or(|a| b.cost.ms() < a.cost.ms())
}

fn beam_pass(
    pipeline: &Arc<Pipeline>,
    k: usize,
    seed: u64,
    restart: usize,
    pass: usize,
    evaluator: &dyn CostEvaluator,
) -> Result<BaselineResult, SearchError> {
    let mut beam = vec![PartialSchedule::initial(pipeline)];
    let mut evaluations = 0u64;
    let depth_total = pipeline.stages().len();
    for depth in 0..depth_total {
        let mut rng = tie_rng(seed, restart, pass, depth);
        let mut scored: Vec<(f64, u64, PartialSchedule)> = Vec::new();
        for state in &beam {
            for a in state.enumerate_actions()? {
                let child = state.apply(&a)?;
                let cost = partial_score(evaluator, &child)?;
                evaluations += 1;
                scored.push((cost.ms(), rng.random(), child));
            }
        }
        scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        scored.truncate(k);
        if depth + 1 == depth_total {
            let (cost, _, schedule) = scored.swap_remove(0);
            return Ok(BaselineResult {
                schedule,
                cost: Cost::new(cost)?,
                evaluations,
            });
        }
        beam = scored.into_iter().map(|(_, _, s)| s).collect();
    }
    unreachable!("pipelines have at least one stage")
}

fn beam_restart(
    pipeline: &Arc<Pipeline>,
    cfg: &BeamConfig,
    restart: usize,
    evaluator: &dyn CostEvaluator,
) -> Result<BaselineResult, SearchError> {
    let mut best: Option<BaselineResult> = None;
    let mut evaluations = 0;
    for pass in 0..cfg.passes {
        let r = beam_pass(pipeline, cfg.beam_size, cfg.seed, restart, pass, evaluator)?;
        evaluations += r.evaluations;
        if better(&best, &r) {
            best = Some(r);
        }
    }
    let mut best = best.expect("passes >= 1");
    best.evaluations = evaluations;
    Ok(best)
}

/// Beam search over stages in scheduling order. Independent restarts run in
/// parallel and the cheapest result wins (lowest restart on ties).
pub fn beam_search(
    pipeline: &Arc<Pipeline>,
    cfg: &BeamConfig,
    evaluator: &dyn CostEvaluator,
) -> Result<BaselineResult, SearchError> {
    cfg.validate()?;
    let results: Vec<_> = (0..cfg.parallel_restarts)
        .into_par_iter()
        .map(|r| beam_restart(pipeline, cfg, r, evaluator))
        .collect::<Result<_, _>>()?;
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let mut best: Option<BaselineResult> = None;
    for r in results {
        if better(&best, &r) {
            best = Some(r);
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.evaluations = evaluations;
    Ok(best)
}

/// Commits, stage by stage, the action whose default completion scores
/// lowest.
pub fn greedy_search(
    pipeline: &Arc<Pipeline>,
    evaluator: &dyn CostEvaluator,
    seed: u64,
) -> Result<BaselineResult, SearchError> {
    let mut state = PartialSchedule::initial(pipeline);
    let mut evaluations = 0u64;
    let mut last = None;
    let mut depth = 0;
    while !state.is_terminal() {
        let mut rng = tie_rng(seed, 0, 0, depth);
        let mut best: Option<(f64, u64, PartialSchedule)> = None;
        for a in state.enumerate_actions()? {
            let child = state.apply(&a)?;
            let cost = partial_score(evaluator, &child)?.ms();
            evaluations += 1;
            let key: u64 = rng.random();
            if best
                .as_ref()
                .is_none_or(|(c, k, _)| cost < *c || (cost == *c && key < *k))
            {
                best = Some((cost, key, child));
            }
        }
        let (cost, _, child) = best.expect("non-terminal states have actions");
        state = child;
        last = Some(cost);
        depth += 1;
    }
    Ok(BaselineResult {
        schedule: state,
        cost: Cost::new(last.expect("at least one stage"))?,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomBudget {
    Time(Duration),
    Candidates(u64),
}

/// Measures uniformly random complete schedules until the budget is spent
/// and keeps the fastest. At least one candidate is always tried. Failed
/// measurements are skipped.
pub fn random_search(
    pipeline: &Arc<Pipeline>,
    budget: RandomBudget,
    executor: &dyn CostEvaluator,
    seed: u64,
) -> Result<BaselineResult, SearchError> {
    match budget {
        RandomBudget::Time(d) if d.is_zero() => {
            return Err(SearchError::InvalidConfig("time budget must be > 0".into()))
        }
        RandomBudget::Candidates(0) => return Err(SearchError::InvalidConfig("candidate budget must be > 0".into())),
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = PartialSchedule::initial(pipeline);
    let started = Instant::now();
    let mut best: Option<BaselineResult> = None;
    let mut evaluations = 0u64;
    loop {
        let s = root.random_completion(&mut rng);
        evaluations += 1;
        match executor.evaluate(&s) {
            Ok(cost) => {
                let r = BaselineResult {
                    schedule: s,
                    cost,
                    evaluations: 0,
                };
                if better(&best, &r) {
                    best = Some(r);
                }
            }
            Err(e) => log::warn!("random candidate failed: {e}"),
        }
        let done = match budget {
            RandomBudget::Time(d) => started.elapsed() >= d,
            RandomBudget::Candidates(n) => evaluations >= n,
        };
        if done {
            break;
        }
    }
    let mut best = best.ok_or(SearchError::AllMeasurementsFailed)?;
    best.evaluations = evaluations;
    Ok(best)
}

/// Exact minimum over every schedule; the first in canonical order wins
/// ties.
pub fn brute_force(pipeline: &Arc<Pipeline>, evaluator: &dyn CostEvaluator) -> Result<BaselineResult, SearchError> {
    brute_force_capped(pipeline, evaluator, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_capped(
    pipeline: &Arc<Pipeline>,
    evaluator: &dyn CostEvaluator,
    cap: u128,
) -> Result<BaselineResult, SearchError> {
    let mut best: Option<BaselineResult> = None;
    let mut evaluations = 0;
    for s in enumerate_all_schedules(pipeline, cap)? {
        let cost = evaluator.evaluate(&s)?;
        evaluations += 1;
        let r = BaselineResult {
            schedule: s,
            cost,
            evaluations: 0,
        };
        if better(&best, &r) {
            best = Some(r);
        }
    }
    let mut best = best.expect("every pipeline has at least one schedule");
    best.evaluations = evaluations;
    Ok(best)
}
