//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any failed. Pass a substring to run a subset,
//! e.g. `cargo test -p nestune --test acceptance -- deceptive`.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nestune::cost::{analytical_cost, execute_schedule, reward_from_cost, AnalyticalModel, ExecConfig};
use nestune::harness::{
    autotune, fixture, mcts_presets, preset, run_experiment, run_preset, Evaluation, ExperimentSpec, RunOptions,
};
use nestune::mcts::{pick_winner_among, ucb_score, ucb_score_at};
use nestune::{
    beam_search, greedy_search, run_ensemble, BeamConfig, Budget, Cost, EnsembleConfig, NodeStats, PartialSchedule,
    RewardScale, RootSelection, SearchTree, SimulationPolicy, TreeConfig, UcbVariant,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_tree(tree: TreeConfig, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        standard_trees: 1,
        greedy_trees: 0,
        tree,
        root_selection: RootSelection::ByCost,
        measurement_repeats: 1,
        seed,
        workers: 1,
    }
}

fn oracle_convergence() -> Verdict {
    let started = Instant::now();
    let mut checked = 0;
    let mut fixtures = Vec::new();
    for name in nestune::harness::FIXTURE_NAMES {
        let f = fixture(name).unwrap();
        let space = f.pipeline.schedule_space_size();
        if space > 200 {
            continue;
        }
        fixtures.push(name);
        let best = common::optimum(&f.pipeline, &f.model);
        let evaluator = Arc::new(AnalyticalModel::new(f.model.clone()));
        for p in mcts_presets() {
            let tree = p.tree_config(Budget::Iterations(50 * space as u64)).unwrap();
            for seed in 0..50 {
                let (_, trace) =
                    run_ensemble(&f.pipeline, single_tree(tree, seed), evaluator.clone()).map_err(|e| e.to_string())?;
                ensure(trace.final_cost.ms() == best, || {
                    format!(
                        "{name} / {} / seed {seed}: {} ms, optimum {best} ms",
                        p.name,
                        trace.final_cost.ms()
                    )
                })?;
                checked += 1;
            }
        }
    }
    ensure(!fixtures.is_empty(), || "no fixture small enough".into())?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{checked} runs on {fixtures:?} hit the optimum in {elapsed:.1?}"
    ))
}

fn stats(visits: u64, cost_sum: f64, reward_sum: f64, win_sum: f64) -> NodeStats {
    NodeStats {
        visits,
        cost_sum,
        reward_sum,
        win_sum,
        ..NodeStats::default()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE)
}

fn ucb_formulas() -> Verdict {
    let mult = |c| UcbVariant::InverseAvgMultiplicative { c_mult: c };
    let s = ucb_score(&stats(1, 2.0, 0.0, 0.0), 1, mult(1.0)).unwrap();
    ensure(close(s, 0.5), || format!("n=1 case gave {s}"))?;
    let s = ucb_score_at(&stats(1, 1.0, 0.0, 0.0), std::f64::consts::E, mult(1.0)).unwrap();
    ensure(close(s, 2.0), || format!("n=e case gave {s}"))?;

    let (a, b) = (stats(4, 4.0, 0.0, 0.0), stats(4, 8.0, 0.0, 0.0));
    let n = 10;
    let (a1, a10) = (
        ucb_score(&a, n, mult(1.0)).unwrap(),
        ucb_score(&a, n, mult(10.0)).unwrap(),
    );
    let (b1, b10) = (
        ucb_score(&b, n, mult(1.0)).unwrap(),
        ucb_score(&b, n, mult(10.0)).unwrap(),
    );
    let radical = (10f64.ln() / 4.0).sqrt();
    ensure(
        close(a1, 1.0 * (1.0 + radical)) && close(a10, 1.0 * (1.0 + 10.0 * radical)),
        || format!("c_mult scaling: {a1} {a10}"),
    )?;
    ensure(a1 > b1 && a10 > b10, || "c_mult changed the ordering".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sqrt2 = std::f64::consts::SQRT_2;
    for case in 0..20 {
        let nj: u64 = rng.random_range(1..1000);
        let n: u64 = nj + rng.random_range(0..5000);
        let costs: Vec<f64> = (0..nj).map(|_| rng.random_range(0.01..50.0)).collect();
        let reference = rng.random_range(0.01..50.0);
        let cost_sum: f64 = costs.iter().sum();
        let reward_sum: f64 = costs.iter().map(|&c| reference / c.max(reference)).sum();
        let win_sum = rng.random_range(0..=nj) as f64;
        let st = stats(nj, cost_sum, reward_sum, win_sum);
        let (nf, njf) = (n as f64, nj as f64);
        let expected = [
            (mult(1.0), (1.0 / (cost_sum / njf)) * (1.0 + (nf.ln() / njf).sqrt())),
            (
                mult(10.0),
                (1.0 / (cost_sum / njf)) * (1.0 + 10.0 * (nf.ln() / njf).sqrt()),
            ),
            (
                UcbVariant::AvgInverseAdditive { c_p: sqrt2 },
                reward_sum / njf + sqrt2 * (2.0 * nf.ln() / njf).sqrt(),
            ),
            (
                UcbVariant::AdaptiveCp,
                reward_sum / njf + (reward_sum / njf) * (2.0 * nf.ln() / njf).sqrt(),
            ),
            (
                UcbVariant::BinaryReward { c_p: sqrt2 },
                win_sum / njf + sqrt2 * (2.0 * nf.ln() / njf).sqrt(),
            ),
        ];
        for (v, want) in expected {
            let got = ucb_score(&st, n, v).map_err(|e| e.to_string())?;
            ensure(close(got, want), || format!("case {case}, {v}: {got} vs {want}"))?;
        }
    }
    Ok("3 hand cases and 20 random vectors x 5 variants within 1e-12".into())
}

const VARIANTS: [UcbVariant; 5] = [
    UcbVariant::InverseAvgMultiplicative { c_mult: 1.0 },
    UcbVariant::InverseAvgMultiplicative { c_mult: 10.0 },
    UcbVariant::AvgInverseAdditive {
        c_p: std::f64::consts::SQRT_2,
    },
    UcbVariant::AdaptiveCp,
    UcbVariant::BinaryReward {
        c_p: std::f64::consts::SQRT_2,
    },
];

fn check_tree(tree: &SearchTree, previous_best: &mut Vec<f64>, iterations: u64) -> Result<(), TestCaseError> {
    previous_best.resize(tree.len(), f64::INFINITY);
    let root = tree.node(tree.root()).stats();
    prop_assert_eq!(root.visits, iterations);
    for (id, previous) in previous_best.iter_mut().enumerate() {
        let node = tree.node(id);
        let st = node.stats();
        let child_visits: u64 = node.children().iter().map(|&c| tree.node(c).stats().visits).sum();
        prop_assert_eq!(
            st.visits,
            child_visits + st.self_simulations,
            "visit conservation at {}",
            id
        );
        prop_assert!(st.best_cost <= *previous, "best cost rose at {}", id);
        *previous = st.best_cost;
        for &c in node.children() {
            prop_assert!(
                st.best_cost <= tree.node(c).stats().best_cost,
                "child beats parent at {}",
                id
            );
        }
        if st.visits > 0 {
            prop_assert!(
                st.average_cost() >= st.best_cost * (1.0 - 1e-12),
                "average below best at {}",
                id
            );
        }
    }
    Ok(())
}

fn tree_invariants() -> Verdict {
    let fixtures: Vec<_> = ["single", "pair", "deceptive", "divergent"]
        .iter()
        .map(|n| fixture(n).unwrap())
        .collect();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        0..fixtures.len(),
        0..VARIANTS.len(),
        any::<bool>(),
        any::<u64>(),
        1u64..60,
    );
    runner
        .run(&strategy, |(fi, vi, greedy, seed, iterations)| {
            let f = &fixtures[fi];
            let evaluator = Arc::new(AnalyticalModel::new(f.model.clone()));
            let policy = if greedy {
                SimulationPolicy::PureGreedy
            } else {
                SimulationPolicy::UniformRandom
            };
            let cfg = TreeConfig::new(VARIANTS[vi], policy, Budget::Iterations(iterations));
            let mut tree = SearchTree::new(PartialSchedule::initial(&f.pipeline), cfg, evaluator, seed).unwrap();
            let mut previous = Vec::new();
            for i in 1..=iterations {
                tree.iterate().unwrap();
                check_tree(&tree, &mut previous, i)?;
            }
            for id in 0..tree.len() {
                let st = tree.node(id).stats();
                if let Some(s) = &st.best_schedule {
                    prop_assert_eq!(analytical_cost(s, &f.model).unwrap().ms(), st.best_cost);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 random runs, checked after every iteration".into())
}

fn winner_rule() -> Verdict {
    let f = fixture("single").unwrap();
    let actions = PartialSchedule::initial(&f.pipeline).enumerate_actions().unwrap();
    let node = |visits: u64, avg: f64, best: f64| NodeStats {
        visits,
        cost_sum: avg * visits as f64,
        best_cost: best,
        ..NodeStats::default()
    };
    let (a, b) = (node(4, 2.0, 1.5), node(4, 1.8, 1.6));
    let won = pick_winner_among(&[(actions[0], &a), (actions[1], &b)]).map_err(|e| e.to_string())?;
    ensure(won == 0, || "average cost chose the winner".into())?;
    let won = pick_winner_among(&[(actions[1], &b), (actions[0], &a)]).map_err(|e| e.to_string())?;
    ensure(won == 1, || "order-dependent winner".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..10_000 {
        let k = rng.random_range(1..8);
        let mut picked: Vec<usize> = (0..actions.len()).collect();
        let children: Vec<_> = (0..k)
            .map(|_| {
                let a = actions[picked.swap_remove(rng.random_range(0..picked.len()))];
                let visits = rng.random_range(0..4u64);
                let best = if visits == 0 {
                    f64::INFINITY
                } else {
                    rng.random_range(1..4) as f64 * 0.5
                };
                (a, node(visits, best + 1.0, best))
            })
            .collect();
        let refs: Vec<_> = children.iter().map(|(a, s)| (*a, s)).collect();
        let mut expected: Option<usize> = None;
        for (i, (a, s)) in children.iter().enumerate() {
            if s.visits == 0 {
                continue;
            }
            let better = match expected {
                None => true,
                Some(j) => {
                    let (b, t) = &children[j];
                    s.best_cost < t.best_cost
                        || (s.best_cost == t.best_cost && s.visits > t.visits)
                        || (s.best_cost == t.best_cost && s.visits == t.visits && a < b)
                }
            };
            if better {
                expected = Some(i);
            }
        }
        let got = pick_winner_among(&refs).ok();
        ensure(got == expected, || {
            format!("case {case}: picked {got:?}, expected {expected:?}")
        })?;
    }
    Ok("A/B example and 10^4 fuzz cases".into())
}

fn baseline_equivalences() -> Verdict {
    let mut compared = 0;
    for name in nestune::harness::FIXTURE_NAMES {
        let f = fixture(name).unwrap();
        let ev = AnalyticalModel::new(f.model.clone());
        for seed in 0..10 {
            let g = greedy_search(&f.pipeline, &ev, seed).map_err(|e| e.to_string())?;
            let cfg = BeamConfig {
                beam_size: 1,
                passes: 1,
                parallel_restarts: 1,
                seed,
            };
            let b = beam_search(&f.pipeline, &cfg, &ev).map_err(|e| e.to_string())?;
            ensure(g.schedule == b.schedule && g.cost == b.cost, || {
                format!("{name} seed {seed}: greedy {} vs beam(1) {}", g.cost, b.cost)
            })?;
            compared += 1;
        }
    }
    for name in ["single", "pair"] {
        let f = fixture(name).unwrap();
        let ev = AnalyticalModel::new(f.model.clone());
        let k: usize = f.pipeline.schedule_space_size() as usize;
        let cfg = BeamConfig {
            beam_size: k,
            passes: 1,
            parallel_restarts: 1,
            seed: 0,
        };
        let b = beam_search(&f.pipeline, &cfg, &ev).map_err(|e| e.to_string())?;
        let best = common::optimum(&f.pipeline, &f.model);
        ensure(b.cost.ms() == best, || {
            format!("{name}: beam({k}) {} vs optimum {best}", b.cost)
        })?;
    }
    Ok(format!(
        "beam(1) = greedy on {compared} runs; exhaustive beam = optimum on single, pair"
    ))
}

fn deceptive_landscape() -> Verdict {
    let f = fixture("deceptive").unwrap();
    let ev = Arc::new(AnalyticalModel::new(f.model.clone()));
    let best = common::optimum(&f.pipeline, &f.model);
    let space = f.pipeline.schedule_space_size() as u64;
    for seed in 0..20 {
        let g = greedy_search(&f.pipeline, &*ev, seed)
            .map_err(|e| e.to_string())?
            .cost
            .ms();
        let b = beam_search(&f.pipeline, &BeamConfig::halide(seed), &*ev)
            .map_err(|e| e.to_string())?
            .cost
            .ms();
        ensure(g > best && b > best, || {
            format!("seed {seed}: greedy {g}, beam {b}, optimum {best}")
        })?;
    }
    // Presets that share a UCB variant build identical trees from the same
    // seed once the budget is an iteration count; run each variant once.
    let mut by_variant: HashMap<String, Vec<&str>> = HashMap::new();
    let mut order = Vec::new();
    for p in mcts_presets() {
        let tree = p.tree_config(Budget::Iterations(50 * space)).unwrap();
        let key = format!("{}", tree.ucb);
        if !by_variant.contains_key(&key) {
            order.push((key.clone(), tree));
        }
        by_variant.entry(key).or_default().push(p.name);
    }
    for (key, tree) in &order {
        for seed in 0..20 {
            let (_, trace) =
                run_ensemble(&f.pipeline, single_tree(*tree, seed), ev.clone()).map_err(|e| e.to_string())?;
            ensure(trace.final_cost.ms() == best, || {
                format!(
                    "{:?} seed {seed}: {} vs optimum {best}",
                    by_variant[key],
                    trace.final_cost.ms()
                )
            })?;
        }
    }
    Ok(format!(
        "greedy and beam(32) above optimum on 20/20; {} presets ({} variants) at optimum on 20/20",
        by_variant.values().map(Vec::len).sum::<usize>(),
        order.len()
    ))
}

fn determinism() -> Verdict {
    let f = fixture("chain5").unwrap();
    let ev = Arc::new(AnalyticalModel::new(f.model.clone()));
    let tree = preset("mcts_1s").unwrap().tree_config(Budget::Iterations(30)).unwrap();
    let trace_csv = |workers: usize| {
        let cfg = EnsembleConfig {
            seed: 42,
            workers,
            ..EnsembleConfig::new(tree)
        };
        run_ensemble(&f.pipeline, cfg, ev.clone()).unwrap().1.to_csv()
    };
    let reference = trace_csv(4);
    for run in 0..5 {
        ensure(trace_csv(4) == reference, || format!("trace differs on rerun {run}"))?;
    }
    for w in [1, 16] {
        ensure(trace_csv(w) == reference, || format!("trace differs with {w} workers"))?;
    }

    let report = |workers: usize| {
        let text = format!(
            "pipeline chain5\npipeline diamond\nalgo mcts_1s iterations=20\nalgo greedy\n\
             seeds 3 4\nworkers {workers}\ntimings off\n"
        );
        let spec = ExperimentSpec::parse(&text, Path::new(".")).unwrap();
        nestune::harness::emit_report(&run_experiment(&spec).unwrap())
            .unwrap()
            .0
    };
    let reference = report(4);
    for run in 0..5 {
        ensure(report(4) == reference, || format!("report differs on rerun {run}"))?;
    }
    for w in [1, 16] {
        ensure(report(w) == reference, || format!("report differs with {w} workers"))?;
    }
    Ok("trace and report CSV byte-identical over 5 reruns and workers 1/4/16".into())
}

fn real_measurement_benefit() -> Verdict {
    let f = fixture("divergent").unwrap();
    let options = RunOptions {
        budget: Some(Budget::Iterations(20)),
        measurement_repeats: 3,
        ..RunOptions::default()
    };
    let (by_cost, by_real) = (preset("mcts_1s").unwrap(), preset("mcts_cost+real_1s").unwrap());
    let exec = ExecConfig::default();
    let (mut cost_ms, mut real_ms) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let a = run_preset(&by_cost, &f.pipeline, &f.model, seed, &options).map_err(|e| e.to_string())?;
        let b = run_preset(&by_real, &f.pipeline, &f.model, seed, &options).map_err(|e| e.to_string())?;
        cost_ms.push(execute_schedule(&a.schedule, 5, &exec).map_err(|e| e.to_string())?.ms());
        real_ms.push(execute_schedule(&b.schedule, 5, &exec).map_err(|e| e.to_string())?.ms());
    }
    let (mc, mr) = (common::median(&cost_ms), common::median(&real_ms));
    let gain = 100.0 * (mc - mr) / mc;
    ensure(mr <= mc, || {
        format!("median measured {mr:.6} ms by real vs {mc:.6} ms by cost")
    })?;
    Ok(format!(
        "median measured {mr:.6} ms by real vs {mc:.6} ms by cost ({gain:.1}% faster)"
    ))
}

fn greedy_tree_accounting() -> Verdict {
    let f = fixture("chain5").unwrap();
    let p = preset("mcts_1s").unwrap();
    let run = |greedy: usize, seed: u64| {
        let options = RunOptions {
            budget: Some(Budget::Iterations(20)),
            standard_trees: 16 - greedy,
            greedy_trees: greedy,
            ..RunOptions::default()
        };
        run_preset(&p, &f.pipeline, &f.model, seed, &options).unwrap()
    };
    let mut wins = 0;
    let mut fractions = Vec::new();
    let mut means = Vec::new();
    for g in [0, 1, 2, 4] {
        let mut total = 0.0;
        for seed in 0..20 {
            let o = run(g, seed);
            total += o.model_cost_ms;
            if g == 1 {
                fractions.push(o.trace.as_ref().unwrap().greedy_fraction());
                if o.model_cost_ms <= run(0, seed).model_cost_ms {
                    wins += 1;
                }
            }
        }
        means.push((g, total / 20.0));
    }
    let mean_fraction = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let summary = means
        .iter()
        .map(|(g, m)| format!("{g}:{m:.6}"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure(wins >= 12, || format!("15+1 <= 16+0 on only {wins}/20 seeds"))?;
    Ok(format!(
        "15+1 <= 16+0 on {wins}/20; greedy decision fraction {mean_fraction:.2}; mean cost by greedy trees {summary}"
    ))
}

fn reward_bounds() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for _ in 0..100 {
        let scale = RewardScale::new(Cost::new(10f64.powf(rng.random_range(-6.0..6.0))).unwrap());
        let mut costs: Vec<f64> = (0..1000).map(|_| 10f64.powf(rng.random_range(-9.0..9.0))).collect();
        costs.sort_by(f64::total_cmp);
        let mut last = f64::INFINITY;
        for c in costs {
            let r = reward_from_cost(Cost::new(c).unwrap(), scale);
            ensure(r > 0.0 && r <= 1.0, || format!("reward {r} for cost {c}"))?;
            ensure(r <= last, || format!("reward rose at cost {c}"))?;
            last = r;
            checked += 1;
        }
    }
    Ok(format!("{checked} costs in (0, 1], non-increasing"))
}

fn autotune_protocol() -> Verdict {
    let f = fixture("chain5").unwrap();
    let fastest = mcts_presets().min_by_key(|p| p.budget(false).unwrap()).unwrap();
    let options = RunOptions {
        evaluation: Evaluation::Model,
        ..RunOptions::default()
    };
    let r =
        autotune(&f.pipeline, &f.model, &fastest, Duration::from_secs(30), 11, &options).map_err(|e| e.to_string())?;
    ensure(r.runs.len() >= 2, || format!("only {} runs", r.runs.len()))?;
    ensure(r.runs.iter().all(|x| r.best_measured_ms <= x.measured_ms), || {
        "best is not the minimum".into()
    })?;
    Ok(format!(
        "{} runs of {}; best measured {:.6} ms",
        r.runs.len(),
        fastest.name,
        r.best_measured_ms
    ))
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 11] = [
    (1, "oracle convergence", oracle_convergence),
    (2, "ucb formulas", ucb_formulas),
    (3, "tree statistics invariants", tree_invariants),
    (4, "winner rule", winner_rule),
    (5, "baseline equivalences", baseline_equivalences),
    (6, "deceptive landscape", deceptive_landscape),
    (7, "ensemble determinism", determinism),
    (8, "real measurement benefit", real_measurement_benefit),
    (9, "greedy tree accounting", greedy_tree_accounting),
    (10, "reward bounds", reward_bounds),
    (11, "autotune protocol", autotune_protocol),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, check) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {n:>2} {name:<28} PASS  [{secs:6.1}s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} {name:<28} FAIL  [{secs:6.1}s] {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
