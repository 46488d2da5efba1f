//! CSV rows for bound tables and Monte Carlo reports.
//!
//! Floats are written with 17 significant digits so every value round-trips.

use serde::Serialize;

use crate::bounds::TailBoundResult;
use crate::{Error, Result};

/// Bounds below this are out of reach of plain Monte Carlo.
pub const DEEP_TAIL: f64 = 1e-6;

/// `x` with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Header plus string-valued rows.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        writer.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            writer.write_record(row).map_err(io)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(format!("csv: {e}")))
    }
}

/// `kind,mode,r,theta,raw_bound,clamped_bound`.
pub fn bound_table(results: &[TailBoundResult]) -> CsvTable {
    let mut table = CsvTable::new(&["kind", "mode", "r", "theta", "raw_bound", "clamped_bound"]);
    for b in results {
        table.push(vec![
            b.kind.label().into(),
            b.mode.label().into(),
            fmt_float(b.r),
            fmt_float(b.theta),
            fmt_float(b.raw),
            fmt_float(b.clamped),
        ]);
    }
    table
}

/// Outcome of comparing an empirical tail with a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The upper confidence limit is below the bound.
    Pass,
    /// The point estimate already exceeds the bound.
    Fail,
    /// The bound lies between the estimate and its upper limit.
    Inconclusive,
    /// The bound is below [`DEEP_TAIL`].
    Unverifiable,
}

impl Verdict {
    pub fn classify(p_hat: f64, upper_conf: f64, bound: f64) -> Verdict {
        if upper_conf <= bound {
            Verdict::Pass
        } else if p_hat > bound {
            Verdict::Fail
        } else if bound < DEEP_TAIL {
            Verdict::Unverifiable
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Unverifiable => "UNVERIFIABLE",
        }
    }
}

/// One row of a Monte Carlo or enumeration report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub statistic: String,
    pub r: f64,
    pub p_hat: f64,
    pub upper_conf: f64,
    pub bound_kind: String,
    pub bound_value: f64,
    /// Absent when no bound was requested.
    pub verdict: Option<Verdict>,
}

/// `statistic,r,p_hat,upper_conf,bound_kind,bound_value,pass`.
pub fn tail_table(rows: &[TailRow]) -> CsvTable {
    let mut table = CsvTable::new(&["statistic", "r", "p_hat", "upper_conf", "bound_kind", "bound_value", "pass"]);
    for row in rows {
        table.push(vec![
            row.statistic.clone(),
            fmt_float(row.r),
            fmt_float(row.p_hat),
            fmt_float(row.upper_conf),
            row.bound_kind.clone(),
            fmt_float(row.bound_value),
            row.verdict.map_or("NA", Verdict::label).into(),
        ]);
    }
    table
}
