//! Line-oriented text formats for pipelines and schedules.
//!
//! Pipeline documents:
//!
//! ```text
//! pipeline blur
//! stage in  256 256 1 4     # id extent_outer extent_inner intensity bytes_per_point
//! stage out 256 256 3 4
//! edge in out               # producer consumer
//! output out
//! ```
//!
//! Schedules are one `decide` line per stage:
//!
//! ```text
//! decide out tile=32x64 at=root par=1 vec=8 unroll=2
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::decision::SchedulingDecision;
use super::pipeline::{Pipeline, Stage};
use super::state::PartialSchedule;
use super::DomainError;

fn parse_err(line: usize, message: impl Into<String>) -> DomainError {
    DomainError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits a line into tokens, dropping `#` comments.
pub(crate) fn tokens(line: &str) -> Vec<&str> {
    line.split('#').next().unwrap_or("").split_whitespace().collect()
}

fn number<T: std::str::FromStr>(line: usize, field: &str, raw: &str) -> Result<T, DomainError> {
    raw.parse()
        .map_err(|_| parse_err(line, format!("{field}: cannot parse `{raw}`")))
}

/// Parses and validates a pipeline document.
pub fn load_pipeline(text: &str) -> Result<Pipeline, DomainError> {
    let mut name = None;
    let mut stages: Vec<Stage> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut pending_edges: Vec<(usize, String, String)> = Vec::new();
    let mut output = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokens(raw);
        let Some(&head) = toks.first() else { continue };
        match head {
            "pipeline" => {
                if toks.len() != 2 {
                    return Err(parse_err(line, "expected `pipeline <name>`"));
                }
                if name.replace(toks[1].to_string()).is_some() {
                    return Err(parse_err(line, "duplicate `pipeline` header"));
                }
            }
            "stage" => {
                if toks.len() != 6 {
                    return Err(parse_err(
                        line,
                        "expected `stage <id> <extent_outer> <extent_inner> <intensity> <bytes_per_point>`",
                    ));
                }
                let stage = Stage {
                    id: toks[1].to_string(),
                    extent_outer: number(line, "extent_outer", toks[2])?,
                    extent_inner: number(line, "extent_inner", toks[3])?,
                    arithmetic_intensity: number(line, "intensity", toks[4])?,
                    footprint_bytes_per_point: number(line, "bytes_per_point", toks[5])?,
                };
                if ids.insert(stage.id.clone(), stages.len()).is_some() {
                    return Err(parse_err(line, format!("duplicate stage id `{}`", stage.id)));
                }
                stages.push(stage);
            }
            "edge" => {
                if toks.len() != 3 {
                    return Err(parse_err(line, "expected `edge <producer_id> <consumer_id>`"));
                }
                pending_edges.push((line, toks[1].to_string(), toks[2].to_string()));
            }
            "output" => {
                if toks.len() != 2 {
                    return Err(parse_err(line, "expected `output <id>`"));
                }
                if output.replace((line, toks[1].to_string())).is_some() {
                    return Err(parse_err(line, "duplicate `output` line"));
                }
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| parse_err(1, "missing `pipeline <name>` header"))?;
    for (line, p, c) in pending_edges {
        let lookup = |id: &str| {
            ids.get(id)
                .copied()
                .ok_or_else(|| parse_err(line, format!("unknown stage `{id}`")))
        };
        edges.push((lookup(&p)?, lookup(&c)?));
    }
    let (line, out_id) = output.ok_or_else(|| parse_err(text.lines().count().max(1), "missing `output <id>` line"))?;
    let output = *ids
        .get(&out_id)
        .ok_or_else(|| parse_err(line, format!("unknown stage `{out_id}`")))?;
    Pipeline::new(name, stages, edges, output)
}

/// Renders a pipeline back into its document form.
pub fn format_pipeline(p: &Pipeline) -> String {
    let mut out = format!("pipeline {}\n", p.name());
    for s in p.stages() {
        let _ = writeln!(
            out,
            "stage {} {} {} {} {}",
            s.id, s.extent_outer, s.extent_inner, s.arithmetic_intensity, s.footprint_bytes_per_point
        );
    }
    for &(a, b) in p.edges() {
        let _ = writeln!(out, "edge {} {}", p.stage(a).id, p.stage(b).id);
    }
    let _ = writeln!(out, "output {}", p.stage(p.output()).id);
    out
}

/// Renders one decision as a `decide` line (no trailing newline).
pub fn format_decision(p: &Pipeline, d: &SchedulingDecision) -> String {
    format!("decide {} {}", p.stage(d.stage).id, d.format_fields())
}

/// Renders a (possibly partial) schedule as `decide` lines in scheduling order.
pub fn format_schedule(s: &PartialSchedule) -> String {
    let mut out = String::new();
    for d in s.decisions() {
        out.push_str(&format_decision(s.pipeline(), d));
        out.push('\n');
    }
    out
}

/// Parses a single `decide` line against a pipeline.
pub fn parse_decision(p: &Pipeline, line_no: usize, line: &str) -> Result<SchedulingDecision, DomainError> {
    let toks = tokens(line);
    if toks.len() != 7 || toks[0] != "decide" {
        return Err(parse_err(
            line_no,
            "expected `decide <stage_id> tile=<o>x<i> at=<root|consumer|inline> par=<0|1> vec=<f> unroll=<f>`",
        ));
    }
    let stage = p
        .stage_index(toks[1])
        .ok_or_else(|| parse_err(line_no, format!("unknown stage `{}`", toks[1])))?;
    let mut fields = HashMap::new();
    for tok in &toks[2..] {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key=value, got `{tok}`")))?;
        if fields.insert(k, v).is_some() {
            return Err(parse_err(line_no, format!("duplicate field `{k}`")));
        }
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| parse_err(line_no, format!("missing field `{k}`")))
    };
    let (to, ti) = get("tile")?
        .split_once('x')
        .ok_or_else(|| parse_err(line_no, "tile must be <outer>x<inner>"))?;
    let parallel_outer = match get("par")? {
        "0" => false,
        "1" => true,
        other => return Err(parse_err(line_no, format!("par must be 0 or 1, got `{other}`"))),
    };
    Ok(SchedulingDecision {
        stage,
        tile_outer: number(line_no, "tile", to)?,
        tile_inner: number(line_no, "tile", ti)?,
        granularity: get("at")?.parse().map_err(|e: String| parse_err(line_no, e))?,
        parallel_outer,
        vectorize: number(line_no, "vec", get("vec")?)?,
        unroll: number(line_no, "unroll", get("unroll")?)?,
    })
}

/// Parses a schedule document. Decisions may appear in any order but must
/// cover a prefix of the scheduling order; each is checked for legality.
pub fn load_schedule(p: &Arc<Pipeline>, text: &str) -> Result<PartialSchedule, DomainError> {
    let mut by_stage = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if tokens(raw).is_empty() {
            continue;
        }
        let d = parse_decision(p, idx + 1, raw)?;
        if by_stage.insert(d.stage, d).is_some() {
            return Err(parse_err(
                idx + 1,
                format!("stage `{}` decided twice", p.stage(d.stage).id),
            ));
        }
    }
    let mut state = PartialSchedule::initial(p);
    for &stage in p.schedule_order() {
        let Some(d) = by_stage.remove(&stage) else { break };
        state = state.apply(&d)?;
    }
    if let Some(d) = by_stage.values().next() {
        return Err(DomainError::Invalid(format!(
            "decisions do not form a prefix of the scheduling order (stray stage `{}`)",
            p.stage(d.stage).id
        )));
    }
    Ok(state)
}
