use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::suite::{AggregateRow, EpisodeOutcome, SuiteReport};
use crate::BenchError;

pub const CSV_HEADER: &str = "scene,planner,schedule,metric,mean,std,n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format {s:?}")),
        }
    }
}

fn two_places(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Aggregates as CSV. A cell with failed episodes gets an extra `failed`
/// row whose mean is the failure count and `n` the cell's episode count.
pub fn render_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    let mut flagged = std::collections::BTreeSet::new();
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{:.2},{:.2},{}", r.scene, r.planner, r.schedule, r.metric, r.mean, r.std, r.n);
        if r.failed > 0 && flagged.insert((&r.scene, &r.planner, &r.schedule)) {
            let _ = writeln!(out, "{},{},{},failed,{:.2},{:.2},{}", r.scene, r.planner, r.schedule, r.failed as f64, 0.0, r.n + r.failed);
        }
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    rows: Vec<AggregateRow>,
    records: &'a [EpisodeOutcome],
}

/// `{"rows": [...], "records": [...]}`; aggregates rounded to two places,
/// raw records at full precision.
pub fn render_json(report: &SuiteReport) -> Result<String, BenchError> {
    let rows = report
        .rows
        .iter()
        .map(|r| AggregateRow { mean: two_places(r.mean), std: two_places(r.std), ..r.clone() })
        .collect();
    Ok(serde_json::to_string_pretty(&JsonReport { rows, records: &report.records })? + "\n")
}

pub fn emit_report(report: &SuiteReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), BenchError> {
    if report.records.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let text = match format {
        ReportFormat::Csv => render_csv(&report.rows),
        ReportFormat::Json => render_json(report)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}
