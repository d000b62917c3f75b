use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ate_repair::data::write_csv;
use ate_repair::{CausalQuery, Dataset, Result, RepairResult};
use serde::Serialize;

use crate::config::Mode;

/// The JSON document written for a `repair` run.
#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub method: &'static str,
    pub query: &'a CausalQuery,
    #[serde(flatten)]
    pub result: &'a RepairResult,
    pub stop_reason: Option<&'static str>,
}

impl<'a> Report<'a> {
    pub fn new(mode: Mode, query: &'a CausalQuery, result: &'a RepairResult) -> Self {
        Self {
            method: mode.name(),
            query,
            result,
            stop_reason: result.stop_reason.map(|s| s.code()),
        }
    }
}

/// `↓95.4%`-style movement label.
pub fn shift_label(result: &RepairResult) -> String {
    let (rel, up) = result.shift();
    if rel == 0.0 {
        return "no change".into();
    }
    let arrow = if up { '↑' } else { '↓' };
    if rel.is_infinite() {
        format!("{arrow}from 0")
    } else {
        format!("{arrow}{:.1}%", 100.0 * rel)
    }
}

pub fn summary(mode: Mode, query: &CausalQuery, result: &RepairResult, estimator: &str) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("method", mode.name().to_owned()),
        ("estimator", estimator.to_owned()),
        ("target", format!("{} ± {}", query.target, query.epsilon)),
        ("ATE before", format!("{:.6}", result.ate_before)),
        ("ATE after", format!("{:.6} ({})", result.ate_after, shift_label(result))),
        (
            "removals",
            format!("{} ({:.2}%)", result.removed_count, 100.0 * result.removed_fraction),
        ),
        (
            "pattern",
            result.pattern.as_ref().map_or_else(|| "-".to_owned(), |p| p.to_string()),
        ),
        ("in range", if result.hit_range { "yes" } else { "no" }.to_owned()),
        (
            "stop",
            result.stop_reason.map_or_else(|| "-".to_owned(), |s| s.code().to_owned()),
        ),
        ("wall time", format!("{:.3}s", result.wall_time)),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// The removed tuples with their original values, keyed by `tuple_id`.
pub fn write_removed(path: &Path, data: &Dataset, result: &RepairResult) -> Result<()> {
    let mut ids = result.removed_ids.clone();
    ids.sort_unstable();
    write_csv(data, BufWriter::new(File::create(path)?), Some(&ids), Some("tuple_id"))
}

pub fn write_trace(path: &Path, result: &RepairResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["iteration", "ate", "action"])?;
    for rec in result.trace() {
        w.write_record([rec.iteration.to_string(), rec.ate.to_string(), rec.action.clone()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ate_repair::RepairMode;

    fn result(before: f64, after: f64) -> RepairResult {
        RepairResult {
            mode: RepairMode::Tuple,
            removed_ids: vec![2],
            pattern: None,
            removed_count: 1,
            removed_fraction: 1.0 / 7.0,
            ate_before: before,
            ate_after: after,
            hit_range: true,
            trace: None,
            wall_time: 0.0,
            stop_reason: None,
        }
    }

    #[test]
    fn shift_follows_the_table_convention() {
        assert_eq!(shift_label(&result(1.25, 0.0)), "↓100.0%");
        assert_eq!(shift_label(&result(-0.5, 0.009)), "↑101.8%");
        assert_eq!(shift_label(&result(2.0, 2.0)), "no change");
    }
}
