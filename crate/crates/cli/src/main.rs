use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use nestune::cost::{analytical_cost, cost_breakdown, execute_schedule, AnalyticalModel, ExecConfig};
use nestune::domain::{format_pipeline, format_schedule, load_schedule};
use nestune::harness::{
    autotune, emit_report, fixture_source, preset, run_experiment, run_preset, Evaluation, ExperimentSpec,
    HarnessError, Metric, PipelineEntry, ResultRow, RowKind, RowStatus, RunOptions, FIXTURE_NAMES,
};
use nestune::{brute_force, Budget};

/// Schedule search for small loop-nest pipelines.
#[derive(Parser)]
#[command(name = "nestune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PipelineArgs {
    /// Pipeline file, or the name of a bundled fixture.
    pipeline: String,
    /// Cost-model constants file; defaults to the fixture's own or the
    /// built-in constants.
    #[arg(long)]
    cost_config: Option<PathBuf>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineEntry, HarnessError> {
        let cost = self.cost_config.as_ref().map(|p| p.to_string_lossy().into_owned());
        PipelineEntry::resolve(&self.pipeline, cost.as_deref(), Path::new("."))
    }
}

#[derive(clap::Args)]
struct SearchArgs {
    /// Algorithm preset.
    #[arg(long, default_value = "mcts_1s")]
    algo: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-decision wall budget for tree search, or total budget for random.
    #[arg(long, conflicts_with = "iterations")]
    budget_ms: Option<u64>,
    /// Per-decision iteration budget (candidates for random search).
    #[arg(long)]
    iterations: Option<u64>,
    /// model | model+noise:<sigma> | real | model+real
    #[arg(long, default_value = "model")]
    measure: Evaluation,
    #[arg(long, default_value_t = 15)]
    trees: usize,
    #[arg(long, default_value_t = 1)]
    greedy_trees: usize,
    /// Worker threads for tree search; defaults to the core count.
    #[arg(long)]
    workers: Option<usize>,
    /// Use the unscaled preset budgets.
    #[arg(long)]
    full_budgets: bool,
    /// Keep the chosen child's subtree across decisions.
    #[arg(long)]
    reuse_subtree: bool,
}

impl SearchArgs {
    fn options(&self) -> RunOptions {
        let mut o = RunOptions {
            evaluation: self.measure,
            full_scale: self.full_budgets,
            budget: match (self.iterations, self.budget_ms) {
                (Some(n), _) => Some(Budget::Iterations(n)),
                (None, Some(ms)) => Some(Budget::WallClock(Duration::from_millis(ms))),
                (None, None) => None,
            },
            standard_trees: self.trees,
            greedy_trees: self.greedy_trees,
            reuse_subtree: self.reuse_subtree,
            ..RunOptions::default()
        };
        if let Some(w) = self.workers {
            o.workers = w;
        }
        o
    }
}

#[derive(Subcommand)]
enum Command {
    /// Search for a schedule with one preset and one seed.
    Tune {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Result row as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-decision ensemble trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the schedule found.
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Rerun a preset with fresh seeds until a wall budget runs out and keep
    /// the fastest measured schedule.
    Autotune {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Total wall budget in seconds.
        #[arg(long, default_value_t = 30.0)]
        seconds: f64,
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Run an experiment file and report normalized results.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the file's `out` line; without either, CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate every schedule and print the cheapest under the model.
    Oracle {
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Print a schedule with its model cost breakdown and measured time.
    Show {
        #[command(flatten)]
        pipeline: PipelineArgs,
        schedule: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: u32,
    },
    /// List bundled fixtures, or print one.
    Fixtures { name: Option<String> },
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Tune {
            pipeline,
            search,
            out,
            trace,
            schedule_out,
        } => {
            let entry = pipeline.resolve()?;
            let algo = preset(&search.algo)?;
            let options = search.options();
            let o = run_preset(&algo, &entry.pipeline, &entry.model, search.seed, &options)?;
            print!("{}", format_schedule(&o.schedule));
            println!("model cost: {:.6} ms", o.model_cost_ms);
            if let Some(m) = o.measured_ms {
                println!("measured:   {m:.6} ms");
            }
            println!("iterations: {}  wall: {:.3} s", o.iterations, o.wall.as_secs_f64());
            if let Some(t) = &o.trace {
                println!("greedy-tree decisions: {:.2}", t.greedy_fraction());
                if let Some(path) = trace {
                    write(&path, &t.to_csv())?;
                }
            }
            if let Some(path) = schedule_out {
                write(&path, &format_schedule(&o.schedule))?;
            }
            if let Some(path) = out {
                let row = ResultRow {
                    pipeline: entry.name,
                    algorithm: algo.name.to_string(),
                    seed: Some(search.seed),
                    kind: RowKind::Run,
                    status: RowStatus::Ok,
                    metric: if o.measured_ms.is_some() {
                        Metric::Measured
                    } else {
                        Metric::Model
                    },
                    model_cost_ms: Some(o.model_cost_ms),
                    measured_ms: o.measured_ms,
                    wall_s: Some(o.wall.as_secs_f64()),
                    iterations: Some(o.iterations),
                    greedy_fraction: o.trace.as_ref().map(|t| t.greedy_fraction()),
                    ratio: Some(1.0),
                    note: String::new(),
                };
                write(&path, &emit_report(&[row])?.0)?;
            }
        }
        Command::Autotune {
            pipeline,
            search,
            seconds,
            schedule_out,
        } => {
            if !(seconds.is_finite() && seconds > 0.0) {
                return Err(HarnessError::Validation("--seconds must be positive".into()));
            }
            let entry = pipeline.resolve()?;
            let algo = preset(&search.algo)?;
            let r = autotune(
                &entry.pipeline,
                &entry.model,
                &algo,
                Duration::from_secs_f64(seconds),
                search.seed,
                &search.options(),
            )?;
            for (k, run) in r.runs.iter().enumerate() {
                println!(
                    "run {k:>3}  seed {:>20}  model {:.6} ms  measured {:.6} ms",
                    run.seed, run.model_cost_ms, run.measured_ms
                );
            }
            print!("{}", format_schedule(&r.best));
            println!("best measured: {:.6} ms over {} runs", r.best_measured_ms, r.runs.len());
            if let Some(path) = schedule_out {
                write(&path, &format_schedule(&r.best))?;
            }
        }
        Command::Bench { spec, out } => {
            let base = spec.parent().unwrap_or(Path::new("."));
            let parsed = ExperimentSpec::parse(&read(&spec)?, base)?;
            let rows = run_experiment(&parsed)?;
            let (csv, summary) = emit_report(&rows)?;
            match out.or(parsed.out) {
                Some(path) => {
                    write(&path, &csv)?;
                    print!("{summary}");
                }
                None => {
                    print!("{csv}");
                    eprint!("{summary}");
                }
            }
        }
        Command::Oracle { pipeline } => {
            let entry = pipeline.resolve()?;
            let r = brute_force(&entry.pipeline, &AnalyticalModel::new(entry.model))?;
            print!("{}", format_schedule(&r.schedule));
            println!("optimum: {:.6} ms over {} schedules", r.cost.ms(), r.evaluations);
        }
        Command::Show {
            pipeline,
            schedule,
            repeats,
        } => {
            let entry = pipeline.resolve()?;
            let s = load_schedule(&entry.pipeline, &read(&schedule)?)?;
            if !s.is_terminal() {
                return Err(HarnessError::Validation(format!(
                    "schedule decides {} of {} stages",
                    s.cursor(),
                    entry.pipeline.stages().len()
                )));
            }
            print!("{}", format_pipeline(&entry.pipeline));
            println!();
            print!("{}", format_schedule(&s));
            println!();
            println!(
                "{:<12} {:>12} {:>12} {:>12} {:>12}",
                "stage", "compute_ns", "memory_ns", "overhead_ns", "launch_ns"
            );
            for c in &cost_breakdown(&s, &entry.model)?.stages {
                println!(
                    "{:<12} {:>12.1} {:>12.1} {:>12.1} {:>12.1}",
                    entry.pipeline.stage(c.stage).id,
                    c.compute_ns,
                    c.memory_ns,
                    c.overhead_ns,
                    c.launch_ns
                );
            }
            println!("model cost: {:.6} ms", analytical_cost(&s, &entry.model)?.ms());
            println!(
                "measured:   {:.6} ms",
                execute_schedule(&s, repeats, &ExecConfig::default())?.ms()
            );
        }
        Command::Fixtures { name: None } => {
            for name in FIXTURE_NAMES {
                println!("{name}");
            }
        }
        Command::Fixtures { name: Some(name) } => {
            let (pipeline, cost) =
                fixture_source(&name).ok_or_else(|| HarnessError::Validation(format!("unknown fixture `{name}`")))?;
            print!("{pipeline}");
            if let Some(cost) = cost {
                println!("\n# cost constants");
                print!("{cost}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
