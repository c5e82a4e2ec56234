mod common;

use std::time::Duration;

use nestune::baselines::brute_force_capped;
use nestune::cost::{analytical_cost, AnalyticalModel, CountingEvaluator};
use nestune::harness::fixture;
use nestune::{beam_search, brute_force, greedy_search, random_search, BeamConfig, RandomBudget, SearchError};

#[test]
fn brute_force_matches_a_direct_walk() {
    for name in ["single", "pair", "deceptive", "divergent"] {
        let f = fixture(name).unwrap();
        let r = brute_force(&f.pipeline, &AnalyticalModel::new(f.model.clone())).unwrap();
        assert_eq!(r.cost.ms(), common::optimum(&f.pipeline, &f.model), "{name}");
        assert_eq!(r.evaluations as u128, f.pipeline.schedule_space_size());
        assert_eq!(analytical_cost(&r.schedule, &f.model).unwrap(), r.cost);
    }
}

#[test]
fn brute_force_refuses_oversized_spaces() {
    let f = fixture("pair").unwrap();
    let ev = AnalyticalModel::new(f.model.clone());
    assert!(brute_force_capped(&f.pipeline, &ev, 100).is_err());
}

#[test]
fn wider_beams_never_do_worse_than_the_optimum_allows() {
    let f = fixture("pair").unwrap();
    let ev = AnalyticalModel::new(f.model.clone());
    let best = common::optimum(&f.pipeline, &f.model);
    for k in [1, 4, 32, 128] {
        let cfg = BeamConfig {
            beam_size: k,
            passes: 2,
            parallel_restarts: 3,
            seed: 1,
        };
        let r = beam_search(&f.pipeline, &cfg, &ev).unwrap();
        assert!(r.cost.ms() >= best);
        assert!(r.schedule.is_terminal());
    }
}

#[test]
fn beam_counts_its_evaluations() {
    let f = fixture("pair").unwrap();
    let ev = CountingEvaluator::new(AnalyticalModel::new(f.model.clone()));
    let r = beam_search(&f.pipeline, &BeamConfig::halide(0), &ev).unwrap();
    assert_eq!(r.evaluations, ev.calls());
}

#[test]
fn greedy_is_seed_stable() {
    let f = fixture("chain5").unwrap();
    let ev = AnalyticalModel::new(f.model.clone());
    assert_eq!(
        greedy_search(&f.pipeline, &ev, 8).unwrap(),
        greedy_search(&f.pipeline, &ev, 8).unwrap()
    );
}

#[test]
fn zero_sized_beams_are_rejected() {
    let f = fixture("single").unwrap();
    let ev = AnalyticalModel::new(f.model.clone());
    let cfg = BeamConfig {
        beam_size: 0,
        ..BeamConfig::halide(0)
    };
    assert!(matches!(
        beam_search(&f.pipeline, &cfg, &ev),
        Err(SearchError::InvalidConfig(_))
    ));
}

#[test]
fn random_search_keeps_the_cheapest_candidate() {
    let f = fixture("pair").unwrap();
    let ev = AnalyticalModel::new(f.model.clone());
    let r = random_search(&f.pipeline, RandomBudget::Candidates(50), &ev, 2).unwrap();
    assert_eq!(r.evaluations, 50);
    let more = random_search(&f.pipeline, RandomBudget::Candidates(500), &ev, 2).unwrap();
    // the first 50 candidates are a prefix of the first 500
    assert!(more.cost <= r.cost);
    assert!(random_search(&f.pipeline, RandomBudget::Time(Duration::ZERO), &ev, 2).is_err());
    assert!(random_search(&f.pipeline, RandomBudget::Time(Duration::from_millis(5)), &ev, 2).is_ok());
}
