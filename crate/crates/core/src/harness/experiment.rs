use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::presets::{preset, run_preset, Evaluation, Preset, RunOptions};
use super::{fixture, HarnessError};
use crate::cost::CostModelConfig;
use crate::domain::{load_pipeline, tokens, Pipeline};
use crate::mcts::Budget;

/// A pipeline to run, with the model constants to run it under.
#[derive(Clone, Debug)]
pub struct PipelineEntry {
    pub name: String,
    pub pipeline: Arc<Pipeline>,
    pub model: CostModelConfig,
}

impl PipelineEntry {
    /// A fixture name, or a pipeline file (with an optional cost-config
    /// file) relative to `base`.
    pub fn resolve(spec: &str, cost: Option<&str>, base: &Path) -> Result<Self, HarnessError> {
        let path = base.join(spec);
        let (pipeline, mut model) = if path.is_file() {
            let text =
                std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            (Arc::new(load_pipeline(&text)?), CostModelConfig::default())
        } else {
            let f = fixture(spec)?;
            (f.pipeline, f.model)
        };
        if let Some(cost) = cost {
            let path = base.join(cost);
            let text =
                std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            model = CostModelConfig::parse(&text)?;
        }
        Ok(PipelineEntry {
            name: pipeline.name().to_string(),
            pipeline,
            model,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmEntry {
    pub preset: Preset,
    /// Overrides the preset budget.
    pub budget: Option<Budget>,
}

/// A matrix of pipelines, algorithms and seeds.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub pipelines: Vec<PipelineEntry>,
    pub algorithms: Vec<AlgorithmEntry>,
    pub seeds: Vec<u64>,
    pub options: RunOptions,
    /// Report search wall time. Off makes model-only reports byte-stable.
    pub timings: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(pipelines: Vec<PipelineEntry>, algorithms: Vec<AlgorithmEntry>, seeds: Vec<u64>) -> Self {
        ExperimentSpec {
            pipelines,
            algorithms,
            seeds,
            options: RunOptions::default(),
            timings: true,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let empty = if self.pipelines.is_empty() {
            "pipeline"
        } else if self.algorithms.is_empty() {
            "algorithm"
        } else if self.seeds.is_empty() {
            "seed"
        } else {
            return Ok(());
        };
        Err(HarnessError::Validation(format!(
            "experiment needs at least one {empty}"
        )))
    }

    /// Parses an experiment document. Relative paths resolve against
    /// `base`.
    ///
    /// ```text
    /// pipeline <fixture | file> [cost=<file>]
    /// algo <preset> [iterations=<n> | budget-ms=<n>]
    /// seeds <n>...
    /// evaluator model | model+noise:<sigma> | real | model+real
    /// trees <standard> <greedy>
    /// workers <n>
    /// repeats <n>
    /// scale desk | full
    /// reuse on | off
    /// timings on | off
    /// out <file>
    /// ```
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut spec = ExperimentSpec::new(Vec::new(), Vec::new(), Vec::new());
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let t = tokens(raw);
            let Some((&head, args)) = t.split_first() else {
                continue;
            };
            let err = |m: String| HarnessError::Parse { line, message: m };
            let one = |what: &str| -> Result<&str, HarnessError> {
                match args {
                    [a] => Ok(a),
                    _ => Err(err(format!("`{head}` takes one {what}"))),
                }
            };
            let num = |s: &str| -> Result<u64, HarnessError> {
                s.parse().map_err(|_| err(format!("cannot parse `{s}` as a count")))
            };
            let flag = |s: &str| match s {
                "on" => Ok(true),
                "off" => Ok(false),
                _ => Err(err(format!("expected on|off, got `{s}`"))),
            };
            match head {
                "pipeline" => {
                    let (name, rest) = args
                        .split_first()
                        .ok_or_else(|| err("`pipeline` needs a name".into()))?;
                    let cost = match rest {
                        [] => None,
                        [c] => Some(
                            c.strip_prefix("cost=")
                                .ok_or_else(|| err(format!("unexpected `{c}`")))?,
                        ),
                        _ => return Err(err("too many arguments".into())),
                    };
                    spec.pipelines.push(PipelineEntry::resolve(name, cost, base)?);
                }
                "algo" => {
                    let (name, rest) = args.split_first().ok_or_else(|| err("`algo` needs a preset".into()))?;
                    let budget = match rest {
                        [] => None,
                        [b] => Some(if let Some(n) = b.strip_prefix("iterations=") {
                            Budget::Iterations(num(n)?)
                        } else if let Some(ms) = b.strip_prefix("budget-ms=") {
                            Budget::WallClock(std::time::Duration::from_millis(num(ms)?))
                        } else {
                            return Err(err(format!("unexpected `{b}`")));
                        }),
                        _ => return Err(err("too many arguments".into())),
                    };
                    if let Some(b) = &budget {
                        b.validate().map_err(|e| err(e.to_string()))?;
                    }
                    spec.algorithms.push(AlgorithmEntry {
                        preset: preset(name).map_err(|e| err(e.to_string()))?,
                        budget,
                    });
                }
                "seeds" => {
                    for s in args {
                        spec.seeds.push(num(s)?);
                    }
                }
                "evaluator" => {
                    spec.options.evaluation = one("evaluator")?
                        .parse::<Evaluation>()
                        .map_err(|e| err(e.to_string()))?
                }
                "trees" => match args {
                    [s, g] => {
                        spec.options.standard_trees = num(s)? as usize;
                        spec.options.greedy_trees = num(g)? as usize;
                    }
                    _ => return Err(err("`trees` takes <standard> <greedy>".into())),
                },
                "workers" => spec.options.workers = num(one("count")?)? as usize,
                "repeats" => spec.options.measurement_repeats = num(one("count")?)? as u32,
                "scale" => {
                    spec.options.full_scale = match one("scale")? {
                        "desk" => false,
                        "full" => true,
                        s => return Err(err(format!("expected desk|full, got `{s}`"))),
                    }
                }
                "reuse" => spec.options.reuse_subtree = flag(one("flag")?)?,
                "timings" => spec.timings = flag(one("flag")?)?,
                "out" => spec.out = Some(base.join(one("path")?)),
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// One seed.
    Run,
    /// Best seed of an algorithm on a pipeline.
    Best,
    /// Geometric mean of an algorithm's best ratios over pipelines.
    Geomean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Analytical cost.
    Model,
    /// Measured execution time.
    Measured,
}

/// Pipeline name used by geometric-mean rows.
pub const ALL_PIPELINES: &str = "all";

/// One line of an experiment report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pipeline: String,
    pub algorithm: String,
    pub seed: Option<u64>,
    pub kind: RowKind,
    pub status: RowStatus,
    pub metric: Metric,
    pub model_cost_ms: Option<f64>,
    pub measured_ms: Option<f64>,
    pub wall_s: Option<f64>,
    pub iterations: Option<u64>,
    #[serde(serialize_with = "four_decimals")]
    pub greedy_fraction: Option<f64>,
    #[serde(serialize_with = "four_decimals")]
    pub ratio: Option<f64>,
    pub note: String,
}

fn four_decimals<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_str(&format!("{x:.4}")),
        None => s.serialize_none(),
    }
}

pub(crate) fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

impl ResultRow {
    fn value(&self) -> Option<f64> {
        match self.metric {
            Metric::Model => self.model_cost_ms,
            Metric::Measured => self.measured_ms,
        }
    }

    fn failed(pipeline: &str, algorithm: &str, seed: Option<u64>, kind: RowKind, metric: Metric, note: String) -> Self {
        ResultRow {
            pipeline: pipeline.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            kind,
            status: RowStatus::Failed,
            metric,
            model_cost_ms: None,
            measured_ms: None,
            wall_s: None,
            iterations: None,
            greedy_fraction: None,
            ratio: None,
            note,
        }
    }
}

/// Runs every (pipeline, algorithm, seed) cell serially. A failing cell
/// becomes a failed row; the rest of the matrix still runs.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let metric = if spec.options.evaluation.measures() {
        Metric::Measured
    } else {
        Metric::Model
    };
    let mut rows = Vec::new();
    let mut best_ratios: Vec<Vec<f64>> = vec![Vec::new(); spec.algorithms.len()];
    for p in &spec.pipelines {
        let mut groups: Vec<Vec<ResultRow>> = Vec::new();
        for a in &spec.algorithms {
            let mut options = spec.options.clone();
            options.budget = a.budget;
            let group = spec
                .seeds
                .iter()
                .map(
                    |&seed| match run_preset(&a.preset, &p.pipeline, &p.model, seed, &options) {
                        Ok(o) => ResultRow {
                            pipeline: p.name.clone(),
                            algorithm: a.preset.name.to_string(),
                            seed: Some(seed),
                            kind: RowKind::Run,
                            status: RowStatus::Ok,
                            metric,
                            model_cost_ms: Some(o.model_cost_ms),
                            measured_ms: o.measured_ms,
                            wall_s: spec.timings.then_some(o.wall.as_secs_f64()),
                            iterations: Some(o.iterations),
                            greedy_fraction: o.trace.as_ref().map(|t| round4(t.greedy_fraction())),
                            ratio: None,
                            note: String::new(),
                        },
                        Err(e) => {
                            log::warn!("{} / {} / seed {seed} failed: {e}", p.name, a.preset.name);
                            ResultRow::failed(&p.name, a.preset.name, Some(seed), RowKind::Run, metric, e.to_string())
                        }
                    },
                )
                .collect();
            groups.push(group);
        }
        let best = groups
            .iter()
            .flatten()
            .filter_map(ResultRow::value)
            .fold(f64::INFINITY, f64::min);
        for (k, (a, mut group)) in spec.algorithms.iter().zip(groups).enumerate() {
            for r in &mut group {
                r.ratio = r.value().map(|v| round4(v / best));
            }
            let best_row = group
                .iter()
                .filter(|r| r.value().is_some())
                .min_by(|x, y| x.value().unwrap().total_cmp(&y.value().unwrap()))
                .cloned();
            let best_row = match best_row {
                Some(mut r) => {
                    best_ratios[k].push(r.value().unwrap() / best);
                    r.kind = RowKind::Best;
                    r
                }
                None => ResultRow::failed(
                    &p.name,
                    a.preset.name,
                    None,
                    RowKind::Best,
                    metric,
                    "every seed failed".into(),
                ),
            };
            rows.extend(group);
            rows.push(best_row);
        }
    }
    for (a, ratios) in spec.algorithms.iter().zip(best_ratios) {
        if ratios.is_empty() {
            rows.push(ResultRow::failed(
                ALL_PIPELINES,
                a.preset.name,
                None,
                RowKind::Geomean,
                metric,
                "no successful runs".into(),
            ));
            continue;
        }
        let g = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
        rows.push(ResultRow {
            pipeline: ALL_PIPELINES.to_string(),
            algorithm: a.preset.name.to_string(),
            seed: None,
            kind: RowKind::Geomean,
            status: RowStatus::Ok,
            metric,
            model_cost_ms: None,
            measured_ms: None,
            wall_s: None,
            iterations: None,
            greedy_fraction: None,
            ratio: Some(round4(g)),
            note: String::new(),
        });
    }
    Ok(rows)
}
