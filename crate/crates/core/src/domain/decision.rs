use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Where a stage's values are computed relative to its consumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Granularity {
    /// Fully materialized before any consumer runs.
    Root,
    /// Recomputed into a scratch buffer for every tile of the consumer.
    AtConsumerTile,
    /// Recomputed at every use site inside the consumer.
    Inlined,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Root, Granularity::AtConsumerTile, Granularity::Inlined];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Root => "root",
            Granularity::AtConsumerTile => "consumer",
            Granularity::Inlined => "inline",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "root" => Ok(Granularity::Root),
            "consumer" => Ok(Granularity::AtConsumerTile),
            "inline" => Ok(Granularity::Inlined),
            other => Err(format!("unknown granularity `{other}`")),
        }
    }
}

pub const VECTORIZE_FACTORS: [u32; 3] = [1, 4, 8];
pub const UNROLL_FACTORS: [u32; 3] = [1, 2, 4];

/// One scheduling decision for one stage.
///
/// The derived ordering is the canonical action order: fields compare
/// lexicographically in declaration order. Within a single state every
/// candidate shares `stage`, so the order is decided by the remaining fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchedulingDecision {
    /// Index of the stage in its pipeline.
    pub stage: usize,
    pub tile_outer: u32,
    pub tile_inner: u32,
    pub granularity: Granularity,
    pub parallel_outer: bool,
    pub vectorize: u32,
    pub unroll: u32,
}

/// An MDP action: the decision for the stage under the cursor.
pub type Action = SchedulingDecision;

impl SchedulingDecision {
    /// Whole-extent tile, computed at root, no parallel/vector/unroll.
    pub fn default_for(stage: usize, extent_outer: u32, extent_inner: u32) -> Self {
        SchedulingDecision {
            stage,
            tile_outer: extent_outer,
            tile_inner: extent_inner,
            granularity: Granularity::Root,
            parallel_outer: false,
            vectorize: 1,
            unroll: 1,
        }
    }

    /// Renders the decision body (everything after the stage id) in the
    /// schedule text format.
    pub fn format_fields(&self) -> String {
        format!(
            "tile={}x{} at={} par={} vec={} unroll={}",
            self.tile_outer,
            self.tile_inner,
            self.granularity,
            u8::from(self.parallel_outer),
            self.vectorize,
            self.unroll
        )
    }
}
