use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;

use super::decision::{Granularity, SchedulingDecision, UNROLL_FACTORS, VECTORIZE_FACTORS};
use super::DomainError;

pub const MIN_EXTENT: u32 = 4;
pub const MAX_EXTENT: u32 = 4096;

/// One loop nest of the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub id: String,
    pub extent_outer: u32,
    pub extent_inner: u32,
    /// Arithmetic operations per point.
    pub arithmetic_intensity: f64,
    pub footprint_bytes_per_point: f64,
}

impl Stage {
    pub fn points(&self) -> u64 {
        u64::from(self.extent_outer) * u64::from(self.extent_inner)
    }
}

/// The (granularity, outer tile, parallel) part of a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct OuterChoice {
    pub granularity: Granularity,
    pub tile_outer: u32,
    pub parallel_outer: bool,
}

/// The (inner tile, vectorize, unroll) part of a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct InnerChoice {
    pub tile_inner: u32,
    pub vectorize: u32,
    pub unroll: u32,
}

/// Factored description of every legal decision for a stage.
///
/// The legal set is `outer × inner`, plus the single canonical inlined
/// decision when inlining is allowed. Sampling draws from this factored form
/// so no decision list is ever built.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct StageSpace {
    pub outer: Vec<OuterChoice>,
    pub inner: Vec<InnerChoice>,
    pub inline: Option<SchedulingDecision>,
}

impl StageSpace {
    fn build(index: usize, stage: &Stage, consumers: usize) -> Self {
        let single_consumer = consumers == 1;
        let mut outer = Vec::new();
        for tile_outer in pow2_divisors(stage.extent_outer) {
            let tiles = stage.extent_outer / tile_outer;
            outer.push(OuterChoice {
                granularity: Granularity::Root,
                tile_outer,
                parallel_outer: false,
            });
            if tiles >= 2 {
                outer.push(OuterChoice {
                    granularity: Granularity::Root,
                    tile_outer,
                    parallel_outer: true,
                });
            }
            if single_consumer {
                outer.push(OuterChoice {
                    granularity: Granularity::AtConsumerTile,
                    tile_outer,
                    parallel_outer: false,
                });
            }
        }
        let mut inner = Vec::new();
        for tile_inner in pow2_divisors(stage.extent_inner) {
            for vectorize in VECTORIZE_FACTORS {
                for unroll in UNROLL_FACTORS {
                    if tile_inner % (vectorize * unroll) == 0 {
                        inner.push(InnerChoice {
                            tile_inner,
                            vectorize,
                            unroll,
                        });
                    }
                }
            }
        }
        let inline = single_consumer.then(|| SchedulingDecision {
            granularity: Granularity::Inlined,
            ..SchedulingDecision::default_for(index, stage.extent_outer, stage.extent_inner)
        });
        StageSpace { outer, inner, inline }
    }

    pub fn count(&self) -> usize {
        self.outer.len() * self.inner.len() + usize::from(self.inline.is_some())
    }

    pub fn decision(&self, stage: usize, outer: &OuterChoice, inner: &InnerChoice) -> SchedulingDecision {
        SchedulingDecision {
            stage,
            tile_outer: outer.tile_outer,
            tile_inner: inner.tile_inner,
            granularity: outer.granularity,
            parallel_outer: outer.parallel_outer,
            vectorize: inner.vectorize,
            unroll: inner.unroll,
        }
    }

    /// Every legal decision, canonical order.
    pub fn enumerate(&self, stage: usize) -> Vec<SchedulingDecision> {
        let mut all = Vec::with_capacity(self.count());
        for o in &self.outer {
            for i in &self.inner {
                all.push(self.decision(stage, o, i));
            }
        }
        all.extend(self.inline);
        all.sort_unstable();
        all
    }

    /// Uniform draw over the legal set in O(1).
    pub fn sample<R: Rng + ?Sized>(&self, stage: usize, rng: &mut R) -> SchedulingDecision {
        let product = self.outer.len() * self.inner.len();
        let pick = rng.random_range(0..self.count());
        if pick < product {
            let o = &self.outer[pick / self.inner.len()];
            let i = &self.inner[pick % self.inner.len()];
            self.decision(stage, o, i)
        } else {
            self.inline
                .expect("index past the product part implies an inline decision")
        }
    }
}

/// Power-of-two divisors of a power-of-two extent, ascending.
pub(crate) fn pow2_divisors(extent: u32) -> impl Iterator<Item = u32> {
    (0..=extent.trailing_zeros()).map(|k| 1u32 << k)
}

/// A DAG of stages with a single output.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    name: String,
    stages: Vec<Stage>,
    edges: Vec<(usize, usize)>,
    output: usize,
    consumers: Vec<Vec<usize>>,
    producers: Vec<Vec<usize>>,
    /// Stage indices in scheduling order: output first, inputs last.
    order: Vec<usize>,
    spaces: Vec<StageSpace>,
}

impl Pipeline {
    /// Builds and validates a pipeline. Edges are (producer, consumer)
    /// index pairs.
    pub fn new(
        name: impl Into<String>,
        stages: Vec<Stage>,
        edges: Vec<(usize, usize)>,
        output: usize,
    ) -> Result<Self, DomainError> {
        let name = name.into();
        if stages.is_empty() {
            return Err(DomainError::Invalid("pipeline has no stages".into()));
        }
        let mut seen = HashMap::new();
        for (i, s) in stages.iter().enumerate() {
            if seen.insert(s.id.as_str(), i).is_some() {
                return Err(DomainError::Invalid(format!("duplicate stage id `{}`", s.id)));
            }
            for extent in [s.extent_outer, s.extent_inner] {
                if !extent.is_power_of_two() || !(MIN_EXTENT..=MAX_EXTENT).contains(&extent) {
                    return Err(DomainError::ExtentOutOfRange {
                        stage: s.id.clone(),
                        extent,
                    });
                }
            }
            if !(s.arithmetic_intensity.is_finite() && s.arithmetic_intensity >= 1.0) {
                return Err(DomainError::Invalid(format!(
                    "stage `{}`: arithmetic intensity must be >= 1",
                    s.id
                )));
            }
            if !(s.footprint_bytes_per_point.is_finite() && s.footprint_bytes_per_point > 0.0) {
                return Err(DomainError::Invalid(format!(
                    "stage `{}`: bytes per point must be > 0",
                    s.id
                )));
            }
        }
        if output >= stages.len() {
            return Err(DomainError::Invalid("output stage index out of range".into()));
        }
        let n = stages.len();
        let mut consumers = vec![Vec::new(); n];
        let mut producers = vec![Vec::new(); n];
        for &(p, c) in &edges {
            if p >= n || c >= n {
                return Err(DomainError::Invalid("edge refers to an unknown stage".into()));
            }
            if p == c {
                return Err(DomainError::Cycle(stages[p].id.clone()));
            }
            if consumers[p].contains(&c) {
                return Err(DomainError::Invalid(format!(
                    "duplicate edge {} -> {}",
                    stages[p].id, stages[c].id
                )));
            }
            consumers[p].push(c);
            producers[c].push(p);
        }

        // Kahn's algorithm, lowest index first, for a deterministic order.
        let mut indegree: Vec<usize> = producers.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            topo.push(i);
            for &c in &consumers[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(DomainError::Cycle(stages[stuck].id.clone()));
        }
        if !consumers[output].is_empty() {
            return Err(DomainError::Invalid(format!(
                "output stage `{}` has consumers",
                stages[output].id
            )));
        }
        if let Some(i) = (0..n).find(|&i| i != output && consumers[i].is_empty()) {
            return Err(DomainError::Invalid(format!(
                "stage `{}` has no consumer and is not the output",
                stages[i].id
            )));
        }

        let order: Vec<usize> = topo.into_iter().rev().collect();
        debug_assert_eq!(order[0], output);
        let spaces = stages
            .iter()
            .enumerate()
            .map(|(i, s)| StageSpace::build(i, s, consumers[i].len()))
            .collect();
        Ok(Pipeline {
            name,
            stages,
            edges,
            output,
            consumers,
            producers,
            order,
            spaces,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, index: usize) -> &Stage {
        &self.stages[index]
    }

    pub fn stage_index(&self, id: &str) -> Option<usize> {
        self.stages.iter().position(|s| s.id == id)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn consumers(&self, stage: usize) -> &[usize] {
        &self.consumers[stage]
    }

    pub fn producers(&self, stage: usize) -> &[usize] {
        &self.producers[stage]
    }

    /// Stages in the order they are scheduled: output first, back to inputs.
    pub fn schedule_order(&self) -> &[usize] {
        &self.order
    }

    /// Stages in an order where every producer precedes its consumers.
    pub fn execution_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().rev().copied()
    }

    pub(crate) fn space(&self, stage: usize) -> &StageSpace {
        &self.spaces[stage]
    }

    /// Number of legal decisions for a stage.
    pub fn action_count(&self, stage: usize) -> usize {
        self.spaces[stage].count()
    }

    /// Size of the full schedule space (saturating).
    pub fn schedule_space_size(&self) -> u128 {
        self.spaces
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.count() as u128))
    }

    pub fn default_decision(&self, stage: usize) -> SchedulingDecision {
        let s = &self.stages[stage];
        SchedulingDecision::default_for(stage, s.extent_outer, s.extent_inner)
    }

    /// Checks a decision against the legality rules for its stage.
    pub fn check_decision(&self, d: &SchedulingDecision) -> Result<(), DomainError> {
        let illegal = |why: &str| DomainError::IllegalAction(format!("{}: {why}", d.format_fields()));
        let Some(stage) = self.stages.get(d.stage) else {
            return Err(illegal("unknown stage"));
        };
        let single_consumer = self.consumers[d.stage].len() == 1;
        let divides = |tile: u32, extent: u32| tile.is_power_of_two() && tile <= extent && extent.is_multiple_of(tile);
        if !divides(d.tile_outer, stage.extent_outer) || !divides(d.tile_inner, stage.extent_inner) {
            return Err(illegal("tile does not divide the extent"));
        }
        if !VECTORIZE_FACTORS.contains(&d.vectorize) || !UNROLL_FACTORS.contains(&d.unroll) {
            return Err(illegal("unsupported vectorize/unroll factor"));
        }
        if !d.tile_inner.is_multiple_of(d.vectorize * d.unroll) {
            return Err(illegal("vectorize * unroll must divide the inner tile"));
        }
        match d.granularity {
            Granularity::Root => {
                if d.parallel_outer && stage.extent_outer / d.tile_outer < 2 {
                    return Err(illegal("parallel loop needs at least two outer tiles"));
                }
            }
            Granularity::AtConsumerTile => {
                if !single_consumer {
                    return Err(illegal("compute-at-tile needs exactly one consumer"));
                }
                if d.parallel_outer {
                    return Err(illegal("only root stages can own a parallel loop"));
                }
            }
            Granularity::Inlined => {
                if !single_consumer {
                    return Err(illegal("inlining needs exactly one consumer"));
                }
                if Some(*d) != self.spaces[d.stage].inline {
                    return Err(illegal("inlined stages carry no loop schedule of their own"));
                }
            }
        }
        Ok(())
    }
}
