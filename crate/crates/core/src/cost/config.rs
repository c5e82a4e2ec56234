use std::fmt::Write as _;

use super::CostError;
use crate::domain::tokens;

/// Constants of the analytical cost model.
///
/// Read from `key = value` documents; unknown keys are rejected and missing
/// keys keep their defaults.
///
/// | key                  | default | meaning                                              |
/// |----------------------|---------|------------------------------------------------------|
/// | `compute_ns_per_op`  | 1.0     | time of one arithmetic op on one lane                |
/// | `mem_ns_per_byte`    | 0.05    | time to move one byte to or from a buffer            |
/// | `parallel_launch_ns` | 2000    | cost of launching one parallel task                  |
/// | `loop_overhead_ns`   | 1.0     | bookkeeping per loop iteration                       |
/// | `recompute_penalty`  | 1.0     | halo recompute weight for compute-at-tile producers  |
/// | `inline_discount`    | 0.0     | fraction of buffer traffic an inlined stage still pays |
/// | `parallel_width`     | 8       | cores a parallel loop can occupy                     |
/// | `tile_locality`      | 0.5     | traffic fraction of a tile-local scratch buffer      |
#[derive(Clone, Debug, PartialEq)]
pub struct CostModelConfig {
    pub compute_ns_per_op: f64,
    pub mem_ns_per_byte: f64,
    pub parallel_launch_ns: f64,
    pub loop_overhead_ns: f64,
    pub recompute_penalty: f64,
    pub inline_discount: f64,
    pub parallel_width: f64,
    pub tile_locality: f64,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig {
            compute_ns_per_op: 1.0,
            mem_ns_per_byte: 0.05,
            parallel_launch_ns: 2000.0,
            loop_overhead_ns: 1.0,
            recompute_penalty: 1.0,
            inline_discount: 0.0,
            parallel_width: 8.0,
            tile_locality: 0.5,
        }
    }
}

impl CostModelConfig {
    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 8] {
        [
            ("compute_ns_per_op", &mut self.compute_ns_per_op),
            ("mem_ns_per_byte", &mut self.mem_ns_per_byte),
            ("parallel_launch_ns", &mut self.parallel_launch_ns),
            ("loop_overhead_ns", &mut self.loop_overhead_ns),
            ("recompute_penalty", &mut self.recompute_penalty),
            ("inline_discount", &mut self.inline_discount),
            ("parallel_width", &mut self.parallel_width),
            ("tile_locality", &mut self.tile_locality),
        ]
    }

    pub fn parse(text: &str) -> Result<Self, CostError> {
        let mut cfg = CostModelConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if tokens(line).is_empty() {
                continue;
            }
            let bad = |m: String| CostError::Config {
                line: idx + 1,
                message: m,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let value: f64 = value
                .parse()
                .map_err(|_| bad(format!("`{key}`: cannot parse `{value}`")))?;
            if !value.is_finite() || value < 0.0 {
                return Err(bad(format!("`{key}` must be finite and >= 0")));
            }
            let mut fields = cfg.fields_mut();
            let slot = fields
                .iter_mut()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| bad(format!("unknown key `{key}`")))?;
            *slot.1 = value;
        }
        if cfg.compute_ns_per_op <= 0.0 {
            return Err(CostError::Config {
                line: 0,
                message: "compute_ns_per_op must be > 0".into(),
            });
        }
        if cfg.parallel_width < 1.0 {
            return Err(CostError::Config {
                line: 0,
                message: "parallel_width must be >= 1".into(),
            });
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut me = self.clone();
        let mut out = String::new();
        for (k, v) in me.fields_mut() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
