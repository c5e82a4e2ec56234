//! Several search trees run side by side and agree on a common root after
//! every decision.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{Cost, CostEvaluator, Measurement};
use crate::domain::{format_decision, Action, PartialSchedule, Pipeline};
use crate::mcts::{SearchError, SearchTree, SimulationPolicy, TreeConfig};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootSelection {
    /// Lowest evaluator cost among the trees' best schedules.
    ByCost,
    /// Lowest measured time after executing each distinct candidate.
    ByRealMeasurement,
}

#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub standard_trees: usize,
    pub greedy_trees: usize,
    /// Shared tree settings. Greedy trees override the simulation policy.
    pub tree: TreeConfig,
    pub root_selection: RootSelection,
    pub measurement_repeats: u32,
    pub seed: u64,
    /// Worker threads for the trees. Results do not depend on this.
    pub workers: usize,
}

impl EnsembleConfig {
    /// 15 standard trees and one greedy tree.
    pub fn new(tree: TreeConfig) -> Self {
        EnsembleConfig {
            standard_trees: 15,
            greedy_trees: 1,
            tree,
            root_selection: RootSelection::ByCost,
            measurement_repeats: 5,
            seed: 0,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.standard_trees + self.greedy_trees == 0 {
            return Err(SearchError::InvalidConfig("an ensemble needs at least one tree".into()));
        }
        if self.workers == 0 {
            return Err(SearchError::InvalidConfig("workers must be >= 1".into()));
        }
        if self.measurement_repeats == 0 {
            return Err(SearchError::InvalidConfig("measurement repeats must be >= 1".into()));
        }
        self.tree.validate()
    }

    pub fn tree_count(&self) -> usize {
        self.standard_trees + self.greedy_trees
    }

    /// Greedy trees take the lowest indices.
    pub fn is_greedy(&self, index: usize) -> bool {
        index < self.greedy_trees
    }

    fn tree_config(&self, index: usize) -> TreeConfig {
        let mut c = self.tree;
        if self.is_greedy(index) {
            c.simulation = SimulationPolicy::PureGreedy;
        }
        c
    }
}

/// One tree's proposal at a root decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub tree: usize,
    pub greedy: bool,
    pub best_schedule: PartialSchedule,
    pub best_cost: Cost,
    pub next_action: Action,
    pub iterations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub step: usize,
    pub stage: String,
    pub candidates: Vec<Candidate>,
    pub chosen: usize,
    /// Measured time per candidate, when measured.
    pub measured_ms: Vec<Option<f64>>,
}

impl DecisionRecord {
    pub fn chosen_candidate(&self) -> &Candidate {
        &self.candidates[self.chosen]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleTrace {
    pub pipeline: String,
    pub decisions: Vec<DecisionRecord>,
    pub final_schedule: PartialSchedule,
    pub final_cost: Cost,
    pub final_measured_ms: Option<f64>,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    step: usize,
    stage: &'a str,
    tree: usize,
    kind: &'static str,
    iterations: u64,
    best_cost_ms: f64,
    measured_ms: Option<f64>,
    next_root: String,
    chosen: u8,
}

impl EnsembleTrace {
    /// Share of root decisions won by a greedy tree.
    pub fn greedy_fraction(&self) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        let won = self.decisions.iter().filter(|d| d.chosen_candidate().greedy).count();
        won as f64 / self.decisions.len() as f64
    }

    /// One line per decision:
    /// `step stage chosen_tree kind best_cost_ms measured_ms action`.
    pub fn to_log(&self) -> String {
        let mut out = String::from("# step stage chosen_tree kind best_cost_ms measured_ms action\n");
        for d in &self.decisions {
            let c = d.chosen_candidate();
            let measured = d.measured_ms[d.chosen].map_or("-".to_string(), |m| format!("{m:.6}"));
            let p = c.best_schedule.pipeline();
            let _ = writeln!(
                out,
                "{} {} {} {} {:.9} {} {}",
                d.step,
                d.stage,
                c.tree,
                kind(c.greedy),
                c.best_cost.ms(),
                measured,
                format_decision(p, &c.next_action)
            );
        }
        out
    }

    /// Every candidate of every decision as CSV.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for d in &self.decisions {
            for (k, c) in d.candidates.iter().enumerate() {
                wr.serialize(TraceRow {
                    step: d.step,
                    stage: &d.stage,
                    tree: c.tree,
                    kind: kind(c.greedy),
                    iterations: c.iterations,
                    best_cost_ms: c.best_cost.ms(),
                    measured_ms: d.measured_ms[k],
                    next_root: format_decision(c.best_schedule.pipeline(), &c.next_action),
                    chosen: u8::from(k == d.chosen),
                })?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn total_iterations(&self) -> u64 {
        self.decisions
            .iter()
            .flat_map(|d| d.candidates.iter().map(|c| c.iterations))
            .sum()
    }
}

fn kind(greedy: bool) -> &'static str {
    if greedy {
        "greedy"
    } else {
        "standard"
    }
}

/// Picks the next common root. Returns the winning index and the measured
/// time of every candidate (all `None` under [`RootSelection::ByCost`]).
///
/// Measurement runs one distinct schedule at a time. A candidate whose
/// measurement fails is dropped with a warning.
pub fn select_next_root(
    candidates: &[Candidate],
    mode: RootSelection,
    measurer: &dyn CostEvaluator,
) -> Result<(usize, Vec<Option<f64>>), SearchError> {
    if candidates.is_empty() {
        return Err(SearchError::NoChildren);
    }
    match mode {
        RootSelection::ByCost => {
            let best = argmin(candidates.iter().map(|c| Some(c.best_cost.ms()))).expect("non-empty");
            Ok((best, vec![None; candidates.len()]))
        }
        RootSelection::ByRealMeasurement => {
            let mut cache: HashMap<&PartialSchedule, Option<f64>> = HashMap::new();
            let mut measured = Vec::with_capacity(candidates.len());
            for c in candidates {
                let m = *cache
                    .entry(&c.best_schedule)
                    .or_insert_with(|| match measurer.evaluate(&c.best_schedule) {
                        Ok(cost) => Some(cost.ms()),
                        Err(e) => {
                            log::warn!("measuring candidate of tree {} failed: {e}", c.tree);
                            None
                        }
                    });
                measured.push(m);
            }
            let best = argmin(measured.iter().copied()).ok_or(SearchError::AllMeasurementsFailed)?;
            Ok((best, measured))
        }
    }
}

fn argmin(values: impl Iterator<Item = Option<f64>>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// The trees of an ensemble, kept alive across root decisions.
pub struct Ensemble {
    config: EnsembleConfig,
    trees: Vec<SearchTree>,
    measurer: Arc<dyn CostEvaluator>,
    pool: rayon::ThreadPool,
}

impl Ensemble {
    pub fn new(
        pipeline: &Arc<Pipeline>,
        config: EnsembleConfig,
        evaluator: Arc<dyn CostEvaluator>,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        let root = PartialSchedule::initial(pipeline);
        let trees = (0..config.tree_count())
            .map(|i| {
                SearchTree::new(
                    root.clone(),
                    config.tree_config(i),
                    Arc::clone(&evaluator),
                    derive_seed(config.seed, i as u64),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
        let measurer: Arc<dyn CostEvaluator> = Arc::new(Measurement {
            repeats: config.measurement_repeats,
            ..Measurement::default()
        });
        Ok(Ensemble {
            config,
            trees,
            measurer,
            pool,
        })
    }

    /// Replaces the evaluator used for root selection by measurement.
    pub fn with_measurer(mut self, measurer: Arc<dyn CostEvaluator>) -> Self {
        self.measurer = measurer;
        self
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn trees(&self) -> &[SearchTree] {
        &self.trees
    }

    /// Runs root decisions until the common root is a complete schedule.
    pub fn run(&mut self) -> Result<EnsembleTrace, SearchError> {
        let pipeline = Arc::clone(self.trees[0].root_state().pipeline());
        let mut decisions = Vec::new();
        let mut root = self.trees[0].root_state().clone();
        while !root.is_terminal() {
            let outcomes: Vec<_> = self
                .pool
                .install(|| self.trees.par_iter_mut().map(|t| t.run_root_decision()).collect());
            let candidates = outcomes
                .into_iter()
                .enumerate()
                .map(|(i, o)| {
                    o.map(|o| Candidate {
                        tree: i,
                        greedy: self.config.is_greedy(i),
                        best_schedule: o.best_schedule,
                        best_cost: o.best_cost,
                        next_action: o.winner_action,
                        iterations: o.iterations_run,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if candidates.iter().any(|c| c.iterations == 0) {
                return Err(SearchError::Budget);
            }
            let (chosen, measured_ms) = select_next_root(&candidates, self.config.root_selection, &*self.measurer)?;
            let next = root.apply(&candidates[chosen].next_action)?;
            for t in &mut self.trees {
                t.reroot(next.clone());
            }
            let stage = pipeline.stage(candidates[chosen].next_action.stage).id.clone();
            decisions.push(DecisionRecord {
                step: decisions.len(),
                stage,
                candidates,
                chosen,
                measured_ms,
            });
            root = next;
        }
        let last = decisions.last().ok_or(SearchError::NoChildren)?;
        let winner = last.chosen_candidate();
        Ok(EnsembleTrace {
            pipeline: pipeline.name().to_string(),
            final_schedule: winner.best_schedule.clone(),
            final_cost: winner.best_cost,
            final_measured_ms: last.measured_ms[last.chosen],
            decisions,
        })
    }
}

/// Builds an ensemble on `pipeline` and schedules it completely.
pub fn run_ensemble(
    pipeline: &Arc<Pipeline>,
    config: EnsembleConfig,
    evaluator: Arc<dyn CostEvaluator>,
) -> Result<(PartialSchedule, EnsembleTrace), SearchError> {
    let trace = Ensemble::new(pipeline, config, evaluator)?.run()?;
    Ok((trace.final_schedule.clone(), trace))
}
