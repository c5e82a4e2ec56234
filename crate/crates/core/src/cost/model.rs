//! Analytical cost model over complete schedules.
//!
//! Per stage `s` with decision `d`:
//!
//! ```text
//! work     = points(s) * recompute(s)
//! compute  = work * intensity * compute_ns_per_op / (vec(s) * par(s))
//! overhead = loop_overhead_ns * (work / (vec(s) * unroll(s)) + tiles(s) * recompute(s)) / par(s)
//! memory   = mem_ns_per_byte * bytes_per_point * points(s) * traffic(s)
//! launch   = parallel_launch_ns * outer_tiles(s)          if d.parallel_outer
//! ```
//!
//! * `recompute` is 1 at root. A compute-at-tile stage pays
//!   `1 + recompute_penalty / inner_tile(host)` on top of its host's
//!   recompute, where the host is the nearest non-inlined consumer. An
//!   inlined stage inherits its consumer's recompute.
//! * `par` is `min(outer_tiles, parallel_width)` of the nearest enclosing
//!   root stage when that stage is parallel, else 1.
//! * Inlined stages run inside their consumer's loops: they take the
//!   consumer's vector and unroll factors and have no loop overhead of their
//!   own.
//! * `traffic` is `1 + consumers` at root (`1` for the output),
//!   `2 * recompute * tile_locality` for compute-at-tile and
//!   `inline_discount` for inlined stages.
//!
//! Times are summed in nanoseconds and reported in milliseconds.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Cost, CostError, CostModelConfig};
use crate::domain::{Granularity, PartialSchedule, SchedulingDecision};

/// Per-stage terms of the analytical model, nanoseconds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageCost {
    pub stage: usize,
    pub compute_ns: f64,
    pub memory_ns: f64,
    pub overhead_ns: f64,
    pub launch_ns: f64,
}

impl StageCost {
    pub fn total_ns(&self) -> f64 {
        self.compute_ns + self.memory_ns + self.overhead_ns + self.launch_ns
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostBreakdown {
    /// Indexed by stage.
    pub stages: Vec<StageCost>,
}

impl CostBreakdown {
    pub fn total_ns(&self) -> f64 {
        self.stages.iter().map(StageCost::total_ns).sum()
    }

    pub fn total_ms(&self) -> f64 {
        self.total_ns() / 1e6
    }
}

/// Evaluates every term of the model for a terminal schedule.
pub fn cost_breakdown(schedule: &PartialSchedule, cfg: &CostModelConfig) -> Result<CostBreakdown, CostError> {
    if !schedule.is_terminal() {
        return Err(CostError::NonTerminal);
    }
    let p = schedule.pipeline();
    let n = p.stages().len();
    let mut by_stage: Vec<Option<SchedulingDecision>> = vec![None; n];
    for d in schedule.decisions() {
        by_stage[d.stage] = Some(*d);
    }
    let dec = |s: usize| by_stage[s].expect("terminal schedule decides every stage");

    let mut par_host = vec![0usize; n];
    let mut loop_host = vec![0usize; n];
    let mut recompute = vec![1.0f64; n];
    let mut vec_eff = vec![1.0f64; n];
    let mut unroll_eff = vec![1.0f64; n];

    // Consumers are scheduled (and so resolved here) before their producers.
    for &s in p.schedule_order() {
        let d = dec(s);
        let consumer = p.consumers(s).first().copied();
        match d.granularity {
            Granularity::Root => {
                par_host[s] = s;
                loop_host[s] = s;
                recompute[s] = 1.0;
                vec_eff[s] = f64::from(d.vectorize);
                unroll_eff[s] = f64::from(d.unroll);
            }
            Granularity::AtConsumerTile => {
                let c = consumer.expect("compute-at-tile stages have a consumer");
                let host = loop_host[c];
                par_host[s] = par_host[c];
                loop_host[s] = s;
                recompute[s] = recompute[host] * (1.0 + cfg.recompute_penalty / f64::from(dec(host).tile_inner));
                vec_eff[s] = f64::from(d.vectorize);
                unroll_eff[s] = f64::from(d.unroll);
            }
            Granularity::Inlined => {
                let c = consumer.expect("inlined stages have a consumer");
                par_host[s] = par_host[c];
                loop_host[s] = loop_host[c];
                recompute[s] = recompute[c];
                vec_eff[s] = vec_eff[c];
                unroll_eff[s] = unroll_eff[c];
            }
        }
    }

    let stages = (0..n)
        .map(|s| {
            let st = p.stage(s);
            let d = dec(s);
            let points = st.points() as f64;
            let outer_tiles = f64::from(st.extent_outer / d.tile_outer);
            let tiles = outer_tiles * f64::from(st.extent_inner / d.tile_inner);
            let host = dec(par_host[s]);
            let par = if host.parallel_outer {
                let host_stage = p.stage(par_host[s]);
                f64::from(host_stage.extent_outer / host.tile_outer).min(cfg.parallel_width)
            } else {
                1.0
            };
            let work = points * recompute[s];
            let compute_ns = work * st.arithmetic_intensity * cfg.compute_ns_per_op / (vec_eff[s] * par);
            let overhead_ns = match d.granularity {
                Granularity::Inlined => 0.0,
                _ => cfg.loop_overhead_ns * (work / (vec_eff[s] * unroll_eff[s]) + tiles * recompute[s]) / par,
            };
            let traffic = match d.granularity {
                Granularity::Root if s == p.output() => 1.0,
                Granularity::Root => 1.0 + p.consumers(s).len() as f64,
                Granularity::AtConsumerTile => 2.0 * recompute[s] * cfg.tile_locality,
                Granularity::Inlined => cfg.inline_discount,
            };
            let memory_ns = cfg.mem_ns_per_byte * st.footprint_bytes_per_point * points * traffic;
            let launch_ns = if d.parallel_outer {
                cfg.parallel_launch_ns * outer_tiles
            } else {
                0.0
            };
            StageCost {
                stage: s,
                compute_ns,
                memory_ns,
                overhead_ns,
                launch_ns,
            }
        })
        .collect();
    Ok(CostBreakdown { stages })
}

/// Modeled execution time of a terminal schedule.
pub fn analytical_cost(schedule: &PartialSchedule, cfg: &CostModelConfig) -> Result<Cost, CostError> {
    let b = cost_breakdown(schedule, cfg)?;
    Cost::new(b.total_ms())
}

/// Modeled cost perturbed by multiplicative log-normal noise.
pub fn noisy_cost<R: Rng + ?Sized>(
    schedule: &PartialSchedule,
    cfg: &CostModelConfig,
    sigma: f64,
    rng: &mut R,
) -> Result<Cost, CostError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(CostError::InvalidArgument(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let base = analytical_cost(schedule, cfg)?;
    if sigma == 0.0 {
        return Ok(base);
    }
    let z = Normal::new(0.0, sigma).expect("sigma validated above").sample(rng);
    let value = (base.ms() * z.exp()).max(f64::MIN_POSITIVE);
    Cost::new(value)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::domain::load_pipeline;

    fn single_8x8() -> Arc<crate::domain::Pipeline> {
        Arc::new(load_pipeline("pipeline one\nstage s 8 8 1 4\noutput s\n").unwrap())
    }

    #[test]
    fn default_schedule_golden_value() {
        let p = single_8x8();
        let s = PartialSchedule::initial(&p).default_completed();
        // compute 64*1*1/(1*1) = 64, overhead 1*(64/1 + 1*1) = 65,
        // memory 0.05*4*64*1 = 12.8, launch 0 -> 141.8 ns.
        let c = analytical_cost(&s, &CostModelConfig::default()).unwrap();
        assert_eq!(c.ms(), 141.8e-6);
    }

    #[test]
    fn vectorizing_divides_compute_by_four() {
        let p = single_8x8();
        let base = SchedulingDecision::default_for(0, 8, 8);
        let vec4 = SchedulingDecision { vectorize: 4, ..base };
        let cfg = CostModelConfig::default();
        let a = cost_breakdown(&PartialSchedule::initial(&p).apply(&base).unwrap(), &cfg).unwrap();
        let b = cost_breakdown(&PartialSchedule::initial(&p).apply(&vec4).unwrap(), &cfg).unwrap();
        assert_eq!(a.stages[0].compute_ns / b.stages[0].compute_ns, 4.0);
    }

    #[test]
    fn deterministic_and_rejects_partial() {
        let p =
            Arc::new(load_pipeline("pipeline two\nstage a 8 8 2 4\nstage b 8 8 1 4\nedge a b\noutput b\n").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = PartialSchedule::initial(&p).random_completion(&mut rng);
        let cfg = CostModelConfig::default();
        assert_eq!(analytical_cost(&s, &cfg), analytical_cost(&s, &cfg));
        let partial = PartialSchedule::initial(&p);
        assert_eq!(analytical_cost(&partial, &cfg), Err(CostError::NonTerminal));
        assert_eq!(noisy_cost(&partial, &cfg, 0.1, &mut rng), Err(CostError::NonTerminal));
    }

    #[test]
    fn inlining_inherits_consumer_vectorization() {
        let p =
            Arc::new(load_pipeline("pipeline two\nstage a 8 8 16 4\nstage b 8 8 1 4\nedge a b\noutput b\n").unwrap());
        let cfg = CostModelConfig::default();
        let out = SchedulingDecision {
            vectorize: 8,
            ..p.default_decision(1)
        };
        let s = PartialSchedule::initial(&p).apply(&out).unwrap();
        let inline = s
            .enumerate_actions()
            .unwrap()
            .into_iter()
            .find(|a| a.granularity == Granularity::Inlined)
            .unwrap();
        let b = cost_breakdown(&s.apply(&inline).unwrap(), &cfg).unwrap();
        assert_eq!(b.stages[0].compute_ns, 64.0 * 16.0 / 8.0);
        assert_eq!(b.stages[0].overhead_ns, 0.0);
        assert_eq!(b.stages[0].memory_ns, 0.0);
    }

    #[test]
    fn noise_free_equals_model_and_is_seeded() {
        let p = single_8x8();
        let s = PartialSchedule::initial(&p).default_completed();
        let cfg = CostModelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            noisy_cost(&s, &cfg, 0.0, &mut rng).unwrap(),
            analytical_cost(&s, &cfg).unwrap()
        );
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..16)
                .map(|_| noisy_cost(&s, &cfg, 0.3, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
    }

    #[test]
    fn noise_log_ratio_is_centered() {
        let p = single_8x8();
        let s = PartialSchedule::initial(&p).default_completed();
        let cfg = CostModelConfig::default();
        let base = analytical_cost(&s, &cfg).unwrap().ms();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let sigma = 0.3;
        let mean: f64 = (0..n)
            .map(|_| (noisy_cost(&s, &cfg, sigma, &mut rng).unwrap().ms() / base).ln())
            .sum::<f64>()
            / n as f64;
        let standard_error = sigma / (n as f64).sqrt();
        assert!(mean.abs() < 5.0 * standard_error, "mean log-ratio {mean}");
    }
}
