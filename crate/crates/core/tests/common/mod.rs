#![allow(dead_code)]

use std::sync::Arc;

use nestune::cost::analytical_cost;
use nestune::{CostModelConfig, PartialSchedule, Pipeline};

/// Every complete schedule of `p`, by walking the action lists directly.
pub fn all_schedules(p: &Arc<Pipeline>) -> Vec<PartialSchedule> {
    fn walk(s: PartialSchedule, out: &mut Vec<PartialSchedule>) {
        if s.is_terminal() {
            out.push(s);
            return;
        }
        for a in s.enumerate_actions().unwrap() {
            walk(s.apply(&a).unwrap(), out);
        }
    }
    let mut out = Vec::new();
    walk(PartialSchedule::initial(p), &mut out);
    out
}

/// Lowest analytical cost over the whole space, in ms.
pub fn optimum(p: &Arc<Pipeline>, model: &CostModelConfig) -> f64 {
    all_schedules(p)
        .iter()
        .map(|s| analytical_cost(s, model).unwrap().ms())
        .fold(f64::INFINITY, f64::min)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
