//! Result tables: one row of run statistics per solve, and the margin-level
//! structure of a solution.
//!
//! Times are written in seconds with one decimal. Every other column is a
//! deterministic function of the instance and the solver settings.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::heuristic::HeuristicTrace;
use crate::instances::Instance;
use crate::models::ModelKind;
use crate::solver::{BilevelSolution, SolveReport};
use crate::Result;

pub const RESULTS_HEADER: [&str; 13] = [
    "instance", "kind", "margins", "LB_h", "time_h", "#opt", "LB", "UB", "gap", "time", "septime", "#sep", "#nodes",
];

pub const STRUCTURE_HEADER: [&str; 8] = [
    "instance", "margins", "leader_profit", "%high", "%medium", "%low", "%served", "time",
];

/// Statistics of one solve, or the average of several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub instance: String,
    pub kind: ModelKind,
    pub margins: String,
    pub heuristic_value: Option<f64>,
    pub heuristic_seconds: Option<f64>,
    /// Number of solves proven optimal.
    pub optimal: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub seconds: f64,
    pub separation_seconds: f64,
    pub separations: f64,
    pub nodes: f64,
}

impl ResultsRow {
    pub fn from_report(instance: &Instance, report: &SolveReport, heuristic: Option<&HeuristicSummary>) -> Self {
        ResultsRow {
            instance: instance.name().to_string(),
            kind: report.kind,
            margins: if report.kind.decides_margins() { margin_label(instance.margins()) } else { "-".into() },
            heuristic_value: heuristic.map(|h| h.value),
            heuristic_seconds: heuristic.map(|h| h.seconds),
            optimal: usize::from(report.optimal),
            lower_bound: report.lower_bound,
            upper_bound: report.upper_bound,
            gap: report.gap,
            seconds: report.time_seconds,
            separation_seconds: report.separation_seconds,
            separations: report.separations as f64,
            nodes: report.nodes as f64,
        }
    }

    /// Column averages over `rows`, with `#opt` summed. The identifying
    /// columns come from the first row. `None` for an empty slice.
    pub fn aggregate(rows: &[ResultsRow]) -> Option<ResultsRow> {
        let first = rows.first()?;
        let count = rows.len() as f64;
        let mean = |f: &dyn Fn(&ResultsRow) -> f64| rows.iter().map(f).sum::<f64>() / count;
        let mean_opt = |f: &dyn Fn(&ResultsRow) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = rows.iter().map(f).collect();
            vals.map(|v| v.iter().sum::<f64>() / count)
        };
        Some(ResultsRow {
            instance: first.instance.clone(),
            kind: first.kind,
            margins: first.margins.clone(),
            heuristic_value: mean_opt(&|r| r.heuristic_value),
            heuristic_seconds: mean_opt(&|r| r.heuristic_seconds),
            optimal: rows.iter().map(|r| r.optimal).sum(),
            lower_bound: mean(&|r| r.lower_bound),
            upper_bound: mean(&|r| r.upper_bound),
            gap: mean(&|r| r.gap),
            seconds: mean(&|r| r.seconds),
            separation_seconds: mean(&|r| r.separation_seconds),
            separations: mean(&|r| r.separations),
            nodes: mean(&|r| r.nodes),
        })
    }

    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>, f: fn(f64) -> String| v.map(f).unwrap_or_else(|| "-".into());
        vec![
            self.instance.clone(),
            self.kind.to_string(),
            self.margins.clone(),
            opt(self.heuristic_value, format_value),
            opt(self.heuristic_seconds, seconds),
            self.optimal.to_string(),
            format_value(self.lower_bound),
            format_value(self.upper_bound),
            format!("{:.2}", self.gap),
            seconds(self.seconds),
            seconds(self.separation_seconds),
            count(self.separations),
            count(self.nodes),
        ]
    }
}

/// Heuristic value and wall time attached to a results row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSummary {
    pub value: f64,
    pub seconds: f64,
}

impl HeuristicSummary {
    pub fn from_trace(trace: &HeuristicTrace) -> Self {
        let seconds = trace.phase1.seconds + trace.phase3.as_ref().map_or(0.0, |p| p.seconds);
        HeuristicSummary {
            value: trace.value,
            seconds,
        }
    }
}

/// Share of served items per margin level, for a margin-deciding solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub instance: String,
    pub margins: String,
    pub leader_profit: f64,
    /// Percent of served items at the largest margin.
    pub high: f64,
    /// Percent at intermediate margins; `None` for two-level margin sets.
    pub medium: Option<f64>,
    /// Percent at the smallest margin.
    pub low: f64,
    /// Percent of all customers that are served.
    pub served: f64,
    pub seconds: f64,
}

impl StructureRow {
    pub fn from_solution(instance: &Instance, solution: &BilevelSolution, seconds: f64) -> Self {
        let margins = instance.margins();
        let served = solution.served();
        let levels: Vec<f64> = served
            .iter()
            .filter_map(|&(_, m)| m.map(|m| margins[m]))
            .collect();
        let (lo, hi) = margins
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &m| (a.min(m), b.max(m)));
        let pct = |k: usize| if levels.is_empty() { 0.0 } else { 100.0 * k as f64 / levels.len() as f64 };
        let high = levels.iter().filter(|&&m| m == hi).count();
        let low = levels.iter().filter(|&&m| m == lo).count();
        StructureRow {
            instance: instance.name().to_string(),
            margins: margin_label(margins),
            leader_profit: solution.leader_profit,
            high: pct(high),
            medium: (margins.len() > 2).then(|| pct(levels.len() - high - low)),
            low: pct(low),
            served: if instance.n() == 0 { 0.0 } else { 100.0 * served.len() as f64 / instance.n() as f64 },
            seconds,
        }
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.instance.clone(),
            self.margins.clone(),
            format_value(self.leader_profit),
            percent(self.high),
            self.medium.map(percent).unwrap_or_else(|| "-".into()),
            percent(self.low),
            percent(self.served),
            seconds(self.seconds),
        ]
    }
}

pub fn write_results_csv(out: impl Write, rows: &[ResultsRow]) -> Result<()> {
    write_csv(out, &RESULTS_HEADER, rows.iter().map(ResultsRow::record))
}

pub fn write_structure_csv(out: impl Write, rows: &[StructureRow]) -> Result<()> {
    write_csv(out, &STRUCTURE_HEADER, rows.iter().map(StructureRow::record))
}

fn write_csv(out: impl Write, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for r in records {
        w.write_record(&r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// `{0.2,0.5}` style label.
pub fn margin_label(margins: &[f64]) -> String {
    let parts: Vec<String> = margins.iter().map(|m| m.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// Value with at most four decimals and no trailing zeros.
pub fn format_value(v: f64) -> String {
    trim(format!("{v:.4}"))
}

fn percent(v: f64) -> String {
    trim(format!("{v:.1}"))
}

fn seconds(v: f64) -> String {
    format!("{v:.1}")
}

fn count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Drops trailing zeros after the decimal point.
fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
