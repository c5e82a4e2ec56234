use std::sync::Arc;

use super::HarnessError;
use crate::baselines::{beam_search, brute_force, greedy_search, BeamConfig};
use crate::cost::{AnalyticalModel, CostModelConfig};
use crate::domain::{load_pipeline, Pipeline};

/// A shipped pipeline together with the model constants it is meant to be
/// searched under.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub pipeline: Arc<Pipeline>,
    pub model: CostModelConfig,
    pub about: &'static str,
}

struct Source {
    name: &'static str,
    pipeline: &'static str,
    cost: Option<&'static str>,
    about: &'static str,
}

const SOURCES: &[Source] = &[
    Source {
        name: "single",
        pipeline: include_str!("../../fixtures/single.pipeline"),
        cost: None,
        about: "one 8x8 stage, 91 schedules",
    },
    Source {
        name: "pair",
        pipeline: include_str!("../../fixtures/pair.pipeline"),
        cost: None,
        about: "two 4x4 stages, 1995 schedules",
    },
    Source {
        name: "chain5",
        pipeline: include_str!("../../fixtures/chain5.pipeline"),
        cost: None,
        about: "five 32x32 stages in a line",
    },
    Source {
        name: "diamond",
        pipeline: include_str!("../../fixtures/diamond.pipeline"),
        cost: None,
        about: "fan-out and fan-in; the shared producer cannot be inlined",
    },
    Source {
        name: "deceptive",
        pipeline: include_str!("../../fixtures/deceptive.pipeline"),
        cost: Some(include_str!("../../fixtures/deceptive.cost")),
        about: "greedy and beam search commit to a locally best output decision that rules out the optimum",
    },
    Source {
        name: "divergent",
        pipeline: include_str!("../../fixtures/divergent.pipeline"),
        cost: Some(include_str!("../../fixtures/divergent.cost")),
        about: "the model's favourite schedule is among the slowest when executed",
    },
];

pub const FIXTURE_NAMES: [&str; 6] = ["single", "pair", "chain5", "diamond", "deceptive", "divergent"];

fn build(src: &Source) -> Result<Fixture, HarnessError> {
    let pipeline = Arc::new(load_pipeline(src.pipeline)?);
    let model = match src.cost {
        Some(text) => CostModelConfig::parse(text)?,
        None => CostModelConfig::default(),
    };
    Ok(Fixture {
        name: src.name,
        pipeline,
        model,
        about: src.about,
    })
}

/// Looks a fixture up by name.
pub fn fixture(name: &str) -> Result<Fixture, HarnessError> {
    let src = SOURCES
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| HarnessError::Validation(format!("unknown fixture `{name}`")))?;
    build(src)
}

pub fn all_fixtures() -> Vec<Fixture> {
    SOURCES
        .iter()
        .map(|s| build(s).expect("shipped fixtures are valid"))
        .collect()
}

/// Raw pipeline and cost-config text of a fixture.
pub fn fixture_source(name: &str) -> Option<(&'static str, Option<&'static str>)> {
    SOURCES.iter().find(|s| s.name == name).map(|s| (s.pipeline, s.cost))
}

/// Loads the deceptive fixture and checks, by exhaustive search, that
/// greedy search and a width-32 beam both finish strictly above the
/// optimum under its model constants.
pub fn build_deceptive_fixture() -> Result<Fixture, HarnessError> {
    let f = fixture("deceptive")?;
    let ev = AnalyticalModel::new(f.model.clone());
    let best = brute_force(&f.pipeline, &ev)?.cost.ms();
    let greedy = greedy_search(&f.pipeline, &ev, 0)?.cost.ms();
    let beam = beam_search(&f.pipeline, &BeamConfig::halide(0), &ev)?.cost.ms();
    if greedy <= best || beam <= best {
        return Err(HarnessError::Validation(format!(
            "deceptive fixture no longer deceives: optimum {best} ms, greedy {greedy} ms, beam {beam} ms"
        )));
    }
    Ok(f)
}
