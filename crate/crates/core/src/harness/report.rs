//! Versioned CSV and JSON report files.
//!
//! A CSV report is the line `uniform-resample-report v1` followed by an
//! ordinary CSV table (header row, one row per grid point and method).

use std::io::Write;

use serde::Serialize;

use super::{
    CoverageReport, DeficitReport, DkwReport, DriftReport, ExperimentSpec, FailureReport, FwerReport, SizeReport,
};
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "uniform-resample-report v1";

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentReport {
    Coverage(CoverageReport),
    Size(SizeReport),
    Fwer(FwerReport),
    Dkw(DkwReport),
    Failure(FailureReport),
    Drift(DriftReport),
    Deficit(DeficitReport),
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn write_rows<W: Write, R: Serialize>(mut w: W, rows: &[R]) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}").map_err(io)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r).map_err(io)?;
    }
    csv.flush().map_err(io)
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            ExperimentReport::Coverage(r) => write_rows(w, &r.rows),
            ExperimentReport::Size(r) => write_rows(w, &r.rows),
            ExperimentReport::Fwer(r) => write_rows(w, &r.rows),
            ExperimentReport::Dkw(r) => write_rows(w, &r.rows),
            ExperimentReport::Failure(r) => write_rows(w, &r.rows),
            ExperimentReport::Drift(r) => write_rows(w, &r.rows),
            ExperimentReport::Deficit(r) => write_rows(w, &r.rows),
        }
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(io)
    }

    /// Worst case over the grid, per method or test.
    pub fn worst_case(&self) -> serde_json::Value {
        let v = match self {
            ExperimentReport::Coverage(r) => serde_json::to_value(&r.worst),
            ExperimentReport::Size(r) => serde_json::to_value(&r.worst),
            ExperimentReport::Fwer(r) => serde_json::to_value(&r.worst),
            ExperimentReport::Dkw(r) => serde_json::to_value(
                r.rows.iter().filter(|x| x.holds == Some(false) || !x.error.is_empty()).collect::<Vec<_>>(),
            ),
            ExperimentReport::Failure(r) => serde_json::to_value(
                r.rows.iter().filter_map(|x| x.coverage.map(|c| (x.delta, x.method.clone(), x.alpha1, x.alpha2, c))).collect::<Vec<_>>(),
            ),
            ExperimentReport::Drift(r) => serde_json::to_value(
                r.rows.iter().filter(|x| x.undercovers == Some(true)).collect::<Vec<_>>(),
            ),
            ExperimentReport::Deficit(r) => serde_json::to_value(
                r.rows.iter().filter(|x| x.holds == Some(false) || !x.error.is_empty()).collect::<Vec<_>>(),
            ),
        };
        v.unwrap_or(serde_json::Value::Null)
    }

    /// Every grid point that hit an engine error, with its message.
    pub fn errors(&self) -> Vec<String> {
        fn collect<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
            let mut v: Vec<String> = it.filter(|e| !e.is_empty()).cloned().collect();
            v.dedup();
            v
        }
        match self {
            ExperimentReport::Coverage(r) => collect(r.rows.iter().map(|x| &x.error)),
            ExperimentReport::Size(r) => collect(r.rows.iter().map(|x| &x.error)),
            ExperimentReport::Fwer(r) => collect(r.rows.iter().map(|x| &x.error)),
            ExperimentReport::Dkw(r) => collect(r.rows.iter().map(|x| &x.error)),
            ExperimentReport::Failure(r) => collect(r.rows.iter().map(|x| &x.error)),
            ExperimentReport::Drift(r) => collect(r.rows.iter().map(|x| &x.error)),
            ExperimentReport::Deficit(r) => collect(r.rows.iter().map(|x| &x.error)),
        }
    }
}

/// JSON summary written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub format: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub worst_case: serde_json::Value,
    pub errors: Vec<String>,
    pub config: &'a ExperimentSpec,
}

impl<'a> Summary<'a> {
    pub fn new(spec: &'a ExperimentSpec, report: &ExperimentReport, wall_time_secs: f64) -> Self {
        Self {
            format: REPORT_HEADER,
            experiment: spec.kind(),
            seed: spec.seed(),
            wall_time_secs,
            worst_case: report.worst_case(),
            errors: report.errors(),
            config: spec,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(io)
    }
}
