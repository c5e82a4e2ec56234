use std::fmt::Write as _;
use std::io;

use super::experiment::{ResultRow, RowKind, RowStatus};
use super::HarnessError;

/// Column order of the report CSV.
pub const REPORT_COLUMNS: [&str; 13] = [
    "pipeline",
    "algorithm",
    "seed",
    "kind",
    "status",
    "metric",
    "model_cost_ms",
    "measured_ms",
    "wall_s",
    "iterations",
    "greedy_fraction",
    "ratio",
    "note",
];

/// Writes rows as CSV, in the order given.
pub fn write_report<W: io::Write>(rows: &[ResultRow], w: W) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record(REPORT_COLUMNS)?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(())
}

pub fn parse_report(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(HarnessError::Validation(format!("unexpected report header {header:?}")));
    }
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// CSV text plus a plain-text summary of best ratios and geometric means.
pub fn emit_report(rows: &[ResultRow]) -> Result<(String, String), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Validation("nothing to report".into()));
    }
    let mut buf = Vec::new();
    write_report(rows, &mut buf)?;
    let csv = String::from_utf8(buf).expect("csv output is UTF-8");
    Ok((csv, summary_table(rows)))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

/// Best ratio per pipeline and algorithm, then the geometric means.
pub fn summary_table(rows: &[ResultRow]) -> String {
    let mut pipelines: Vec<&str> = Vec::new();
    let mut algorithms: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.kind == RowKind::Best) {
        if !pipelines.contains(&r.pipeline.as_str()) {
            pipelines.push(&r.pipeline);
        }
        if !algorithms.contains(&r.algorithm.as_str()) {
            algorithms.push(&r.algorithm);
        }
    }
    let width = algorithms.iter().map(|a| a.len()).max().unwrap_or(0).max(9);
    let mut out = String::new();
    let _ = write!(out, "{:width$}", "algorithm");
    for p in &pipelines {
        let _ = write!(out, "  {:>10}", p);
    }
    let _ = writeln!(out, "  {:>10}", "geomean");
    for a in &algorithms {
        let _ = write!(out, "{a:width$}");
        for p in &pipelines {
            let r = rows
                .iter()
                .find(|r| r.kind == RowKind::Best && r.algorithm == *a && r.pipeline == *p);
            let text = match r {
                Some(r) if r.status == RowStatus::Ok => cell(r.ratio),
                Some(_) => "failed".into(),
                None => "-".into(),
            };
            let _ = write!(out, "  {text:>10}");
        }
        let g = rows
            .iter()
            .find(|r| r.kind == RowKind::Geomean && r.algorithm == *a)
            .and_then(|r| r.ratio);
        let _ = writeln!(out, "  {:>10}", cell(g));
    }
    out
}
