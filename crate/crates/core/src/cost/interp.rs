//! Loop-nest interpreter: runs a scheduled pipeline on synthetic data and
//! times it.
//!
//! Every stage computes, per point, a seed value plus a two-tap read of each
//! producer along the inner dimension, then applies `intensity` rounds of a
//! multiply-add. A point occupies `bytes_per_point / 4` f32 lanes; reading a
//! point sums its lanes, so buffer traffic scales with the footprint.
//!
//! The schedule decides how that work runs:
//! * root stages are materialized in full, tile by tile, in producer-first
//!   order; a parallel outer loop hands rows of outer tiles to the rayon pool;
//! * compute-at-tile stages are materialized into a scratch buffer covering
//!   exactly the region one tile of their host needs (halo included);
//! * inlined stages are recomputed at every read;
//! * the inner loop runs `vectorize`-wide lane batches, `unroll` batches per
//!   step.
//!
//! All schedules of a pipeline produce bit-identical output buffers.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{Cost, CostError};
use crate::domain::{Granularity, PartialSchedule, Pipeline, SchedulingDecision};

const DECAY: f32 = 0.999;
const BIAS: f32 = 0.0005;
const LANE_STEP: f32 = 0.001;

/// Held for the duration of every timed execution.
static MEASUREMENT_LOCK: Mutex<()> = Mutex::new(());

#[derive(Clone, Debug, PartialEq)]
pub struct ExecConfig {
    /// Upper bound on the bytes of all materialized buffers.
    pub memory_cap_bytes: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            memory_cap_bytes: 512 << 20,
        }
    }
}

/// Result of one interpreted run.
#[derive(Clone, Copy, Debug)]
pub struct Execution {
    pub elapsed: Duration,
    /// Sum of the output buffer; identical for every schedule of a pipeline.
    pub checksum: f64,
}

#[derive(Clone, Copy, Debug)]
struct Region {
    x0: u32,
    x1: u32,
    y0: u32,
    y1: u32,
}

impl Region {
    fn width(&self) -> usize {
        (self.y1 - self.y0) as usize
    }

    fn len(&self) -> usize {
        (self.x1 - self.x0) as usize * self.width()
    }
}

struct Plan<'a> {
    p: &'a Pipeline,
    dec: Vec<SchedulingDecision>,
    lanes: Vec<usize>,
    ops: Vec<u32>,
}

struct RegionBuf {
    stage: usize,
    region: Region,
    data: Vec<f32>,
}

struct Writer<'b> {
    data: &'b mut [f32],
    ox: u32,
    oy: u32,
    width: usize,
    lanes: usize,
}

struct Env<'a, 'b> {
    plan: &'a Plan<'a>,
    roots: &'b [Option<Vec<f32>>],
    scratch: &'b [RegionBuf],
}

fn map_coord(x: u32, from: u32, to: u32) -> u32 {
    (u64::from(x) * u64::from(to) / u64::from(from)) as u32
}

impl<'a> Plan<'a> {
    fn new(schedule: &'a PartialSchedule) -> Self {
        let p: &Pipeline = schedule.pipeline();
        let mut dec = vec![p.default_decision(0); p.stages().len()];
        for d in schedule.decisions() {
            dec[d.stage] = *d;
        }
        let lanes = p
            .stages()
            .iter()
            .map(|s| ((s.footprint_bytes_per_point / 4.0).round() as usize).max(1))
            .collect();
        let ops = p
            .stages()
            .iter()
            .map(|s| s.arithmetic_intensity.round() as u32)
            .collect();
        Plan { p, dec, lanes, ops }
    }

    fn footprint_bytes(&self) -> u64 {
        (0..self.dec.len())
            .filter(|&s| self.dec[s].granularity != Granularity::Inlined)
            .map(|s| self.p.stage(s).points() * self.lanes[s] as u64 * 4)
            .sum()
    }

    /// Region of `producer` that computing `region` of `consumer` reads.
    fn producer_region(&self, consumer: usize, region: Region, producer: usize) -> Region {
        let c = self.p.stage(consumer);
        let q = self.p.stage(producer);
        let rows = |x| map_coord(x, c.extent_outer, q.extent_outer);
        let cols = |y| map_coord(y, c.extent_inner, q.extent_inner);
        Region {
            x0: rows(region.x0),
            x1: rows(region.x1 - 1) + 1,
            y0: cols(region.y0),
            y1: (cols(region.y1 - 1) + 1).min(q.extent_inner - 1) + 1,
        }
    }

    /// Compute-at-tile stages that must be materialized before running
    /// `region` of `stage`, looking through inlined producers.
    fn hosted(&self, stage: usize, region: Region, out: &mut Vec<(usize, Region)>) {
        for &q in self.p.producers(stage) {
            let r = self.producer_region(stage, region, q);
            match self.dec[q].granularity {
                Granularity::Root => {}
                Granularity::AtConsumerTile => out.push((q, r)),
                Granularity::Inlined => self.hosted(q, r, out),
            }
        }
    }
}

impl Env<'_, '_> {
    fn lane_sum(v: f32, lanes: usize) -> f32 {
        let mut acc = 0.0f32;
        for l in 0..lanes {
            acc += v + l as f32 * LANE_STEP;
        }
        acc
    }

    fn sum_stored(data: &[f32], index: usize, lanes: usize) -> f32 {
        let mut acc = 0.0f32;
        for v in &data[index * lanes..(index + 1) * lanes] {
            acc += *v;
        }
        acc
    }

    fn read(&self, q: usize, x: u32, y: u32) -> f32 {
        let plan = self.plan;
        let lanes = plan.lanes[q];
        match plan.dec[q].granularity {
            Granularity::Root => {
                let data = self.roots[q].as_deref().expect("root producers run before consumers");
                let width = plan.p.stage(q).extent_inner as usize;
                Self::sum_stored(data, x as usize * width + y as usize, lanes)
            }
            Granularity::AtConsumerTile => {
                let buf = self
                    .scratch
                    .iter()
                    .find(|b| b.stage == q)
                    .expect("compute-at-tile producers are materialized per tile");
                let r = buf.region;
                let index = (x - r.x0) as usize * r.width() + (y - r.y0) as usize;
                Self::sum_stored(&buf.data, index, lanes)
            }
            Granularity::Inlined => Self::lane_sum(self.point_value(q, x, y), lanes),
        }
    }

    fn input_value(&self, s: usize, x: u32, y: u32) -> f32 {
        let p = self.plan.p;
        let st = p.stage(s);
        let mut v = ((x * 31 + y * 17 + s as u32 * 7) % 64) as f32 / 64.0;
        for &q in p.producers(s) {
            let qs = p.stage(q);
            let qx = map_coord(x, st.extent_outer, qs.extent_outer);
            let qy = map_coord(y, st.extent_inner, qs.extent_inner);
            let qy1 = (qy + 1).min(qs.extent_inner - 1);
            v += self.read(q, qx, qy) + self.read(q, qx, qy1);
        }
        v
    }

    fn point_value(&self, s: usize, x: u32, y: u32) -> f32 {
        let mut v = [self.input_value(s, x, y)];
        apply_ops(&mut v, self.plan.ops[s]);
        v[0]
    }

    fn segment<const N: usize>(&self, s: usize, x: u32, y: u32, out: &mut Writer<'_>) {
        let mut v = [0.0f32; N];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = self.input_value(s, x, y + k as u32);
        }
        apply_ops(&mut v, self.plan.ops[s]);
        let base = (x - out.ox) as usize * out.width + (y - out.oy) as usize;
        for (k, value) in v.iter().enumerate() {
            let at = (base + k) * out.lanes;
            for (l, dst) in out.data[at..at + out.lanes].iter_mut().enumerate() {
                *dst = value + l as f32 * LANE_STEP;
            }
        }
    }
}

#[inline(always)]
fn apply_ops<const N: usize>(v: &mut [f32; N], ops: u32) {
    for _ in 0..ops {
        for x in v.iter_mut() {
            *x = *x * DECAY + BIAS;
        }
    }
}

/// Runs one tile of `stage`, materializing its hosted producers first.
fn run_tile(plan: &Plan<'_>, roots: &[Option<Vec<f32>>], stage: usize, tile: Region, out: &mut Writer<'_>) {
    let mut hosted = Vec::new();
    plan.hosted(stage, tile, &mut hosted);
    let scratch: Vec<RegionBuf> = hosted
        .into_iter()
        .map(|(q, r)| materialize(plan, roots, q, r))
        .collect();
    let env = Env {
        plan,
        roots,
        scratch: &scratch,
    };
    let d = plan.dec[stage];
    let step = d.vectorize * d.unroll;
    for x in tile.x0..tile.x1 {
        let mut y = tile.y0;
        while y + step <= tile.y1 {
            for u in 0..d.unroll {
                let at = y + u * d.vectorize;
                match d.vectorize {
                    8 => env.segment::<8>(stage, x, at, out),
                    4 => env.segment::<4>(stage, x, at, out),
                    _ => env.segment::<1>(stage, x, at, out),
                }
            }
            y += step;
        }
        // Clipped scratch tiles may leave a ragged tail.
        while y < tile.y1 {
            env.segment::<1>(stage, x, y, out);
            y += 1;
        }
    }
}

/// Computes `region` of a compute-at-tile stage into a fresh scratch buffer,
/// walking the region in the stage's own tile grid.
fn materialize(plan: &Plan<'_>, roots: &[Option<Vec<f32>>], stage: usize, region: Region) -> RegionBuf {
    let lanes = plan.lanes[stage];
    let mut data = vec![0.0f32; region.len() * lanes];
    let d = plan.dec[stage];
    let mut out = Writer {
        data: &mut data,
        ox: region.x0,
        oy: region.y0,
        width: region.width(),
        lanes,
    };
    let mut x = region.x0 - region.x0 % d.tile_outer;
    while x < region.x1 {
        let mut y = region.y0 - region.y0 % d.tile_inner;
        while y < region.y1 {
            let tile = Region {
                x0: x.max(region.x0),
                x1: (x + d.tile_outer).min(region.x1),
                y0: y.max(region.y0),
                y1: (y + d.tile_inner).min(region.y1),
            };
            run_tile(plan, roots, stage, tile, &mut out);
            y += d.tile_inner;
        }
        x += d.tile_outer;
    }
    RegionBuf { stage, region, data }
}

fn run_root(plan: &Plan<'_>, roots: &[Option<Vec<f32>>], stage: usize) -> Vec<f32> {
    let st = plan.p.stage(stage);
    let d = plan.dec[stage];
    let lanes = plan.lanes[stage];
    let width = st.extent_inner as usize;
    let mut data = vec![0.0f32; st.points() as usize * lanes];
    let chunk = d.tile_outer as usize * width * lanes;
    let body = |(ot, rows): (usize, &mut [f32])| {
        let x0 = ot as u32 * d.tile_outer;
        let mut out = Writer {
            data: rows,
            ox: x0,
            oy: 0,
            width,
            lanes,
        };
        for it in 0..st.extent_inner / d.tile_inner {
            let tile = Region {
                x0,
                x1: x0 + d.tile_outer,
                y0: it * d.tile_inner,
                y1: (it + 1) * d.tile_inner,
            };
            run_tile(plan, roots, stage, tile, &mut out);
        }
    };
    if d.parallel_outer {
        data.par_chunks_mut(chunk).enumerate().for_each(body);
    } else {
        data.chunks_mut(chunk).enumerate().for_each(body);
    }
    data
}

fn run_pipeline(plan: &Plan<'_>) -> f64 {
    let p = plan.p;
    let mut roots: Vec<Option<Vec<f32>>> = vec![None; p.stages().len()];
    for s in p.execution_order() {
        if plan.dec[s].granularity == Granularity::Root {
            let data = run_root(plan, &roots, s);
            roots[s] = Some(data);
        }
    }
    roots[p.output()]
        .as_deref()
        .expect("output is always root")
        .iter()
        .map(|&v| f64::from(v))
        .sum()
}

fn check(schedule: &PartialSchedule, cfg: &ExecConfig) -> Result<(), CostError> {
    if !schedule.is_terminal() {
        return Err(CostError::NonTerminal);
    }
    let need = Plan::new(schedule).footprint_bytes();
    if need > cfg.memory_cap_bytes {
        return Err(CostError::BufferOverflow {
            needed: need,
            cap: cfg.memory_cap_bytes,
        });
    }
    Ok(())
}

/// Runs a terminal schedule once without taking the measurement lock.
pub fn execute_once(schedule: &PartialSchedule, cfg: &ExecConfig) -> Result<Execution, CostError> {
    check(schedule, cfg)?;
    let plan = Plan::new(schedule);
    let start = Instant::now();
    let checksum = std::hint::black_box(run_pipeline(&plan));
    Ok(Execution {
        elapsed: start.elapsed(),
        checksum,
    })
}

/// Measures a terminal schedule: the minimum wall-clock time over
/// `repeats` runs. Holds a process-wide lock so no two measurements overlap.
pub fn execute_schedule(schedule: &PartialSchedule, repeats: u32, cfg: &ExecConfig) -> Result<Cost, CostError> {
    if repeats == 0 {
        return Err(CostError::InvalidArgument("repeats must be >= 1".into()));
    }
    check(schedule, cfg)?;
    let _guard = MEASUREMENT_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let mut best = Duration::MAX;
    for _ in 0..repeats {
        best = best.min(execute_once(schedule, cfg)?.elapsed);
    }
    // A run can finish under the timer's resolution.
    Cost::new((best.as_secs_f64() * 1e3).max(1e-6))
}
