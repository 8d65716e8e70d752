//! Machine-readable output.
//!
//! Records are one JSON object per line with a `record` discriminator. Floats
//! are written with 17 significant digits in scientific notation, which
//! round-trips every finite `f64` and keeps golden files byte-stable.
//! Non-finite values become `null` in JSON and `NaN`/`inf` in CSV.

use std::fmt::Write as _;
use std::io::{Read, Write};

use super::HarnessError;
use crate::estimators::EstimatorId;
use crate::inference::EstimateReport;
use crate::simulation::{MethodSummary, SimulationReport};

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Str(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    List(Vec<String>),
    Null,
}

/// An ordered JSON object; field order is preserved in the output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    fields: Vec<(String, Field)>,
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Self::default().with("record", Field::Str(kind.into()))
    }

    pub fn with(mut self, key: &str, value: Field) -> Self {
        self.fields.push((key.into(), value));
        self
    }

    pub fn str(self, key: &str, v: impl Into<String>) -> Self {
        self.with(key, Field::Str(v.into()))
    }

    pub fn num(self, key: &str, v: f64) -> Self {
        self.with(key, Field::Num(v))
    }

    pub fn int(self, key: &str, v: u64) -> Self {
        self.with(key, Field::Int(v))
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}:", quote(k));
            match v {
                Field::Str(s) => out.push_str(&quote(s)),
                Field::Num(x) if x.is_finite() => out.push_str(&fmt_f64(*x)),
                Field::Num(_) | Field::Null => out.push_str("null"),
                Field::Int(n) => {
                    let _ = write!(out, "{n}");
                }
                Field::Bool(b) => {
                    let _ = write!(out, "{b}");
                }
                Field::List(items) => {
                    out.push('[');
                    out.push_str(&items.iter().map(|s| quote(s)).collect::<Vec<_>>().join(","));
                    out.push(']');
                }
            }
        }
        out.push('}');
        out
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json())?;
    }
    w.flush()
}

pub fn estimate_record(r: &EstimateReport) -> Record {
    Record::new("estimate")
        .str("method", r.method.name())
        .num("tau_hat", r.tau_hat)
        .num("var_hat", r.var_hat)
        .num("ci_low", r.ci_low)
        .num("ci_high", r.ci_high)
        .num("level", r.level)
        .num("lambda_used", r.lambda_used)
}

pub fn summary_records(r: &SimulationReport) -> Vec<Record> {
    r.methods
        .iter()
        .map(|m| {
            Record::new("summary")
                .str("design", r.design.clone())
                .str("method", m.method.name())
                .num("tau", r.tau)
                .int("reps", r.reps)
                .num("level", r.level)
                .num("bias", m.bias)
                .num("std", m.std)
                .num("rmse", m.rmse)
                .num("coverage", m.coverage)
                .num("length", m.avg_ci_length)
                .int("completed", m.completed)
                .int("failed", m.failed)
        })
        .collect()
}

/// Column order of the human and CSV simulation tables.
pub const SUMMARY_COLUMNS: [&str; 5] = ["Bias", "STD", "RMSE", "coverage", "length"];

pub fn estimate_table(reports: &[EstimateReport]) -> String {
    let mut s = format!(
        "{:<10} {:>14} {:>14} {:>14} {:>14} {:>6} {:>12}\n",
        "method", "tau_hat", "var_hat", "ci_low", "ci_high", "level", "lambda"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:>14.6} {:>14.6e} {:>14.6} {:>14.6} {:>6.3} {:>12.4e}",
            r.method.name(),
            r.tau_hat,
            r.var_hat,
            r.ci_low,
            r.ci_high,
            r.level,
            r.lambda_used
        );
    }
    s
}

pub fn simulation_table(r: &SimulationReport) -> String {
    let mut s = format!("design {}  tau {:.6}  reps {}  level {}\n", r.design, r.tau, r.reps, r.level);
    let _ = write!(s, "{:<10}", "method");
    for c in SUMMARY_COLUMNS {
        let _ = write!(s, " {c:>10}");
    }
    s.push('\n');
    for m in &r.methods {
        let _ = writeln!(
            s,
            "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}{}",
            m.method.name(),
            m.bias,
            m.std,
            m.rmse,
            m.coverage,
            m.avg_ci_length,
            if m.failed > 0 { format!("  ({} failed)", m.failed) } else { String::new() }
        );
    }
    s
}

/// One row of the CSV simulation report.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub design: String,
    pub tau: f64,
    pub reps: u64,
    pub level: f64,
    pub summary: MethodSummary,
}

const SUMMARY_HEADER: [&str; 12] = [
    "design", "method", "tau", "reps", "level", "Bias", "STD", "RMSE", "coverage", "length", "completed", "failed",
];

pub fn summary_rows(r: &SimulationReport) -> Vec<SummaryRow> {
    r.methods
        .iter()
        .map(|m| SummaryRow {
            design: r.design.clone(),
            tau: r.tau,
            reps: r.reps,
            level: r.level,
            summary: m.clone(),
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let m = &r.summary;
        wtr.write_record([
            r.design.clone(),
            m.method.name().into(),
            fmt_f64(r.tau),
            r.reps.to_string(),
            fmt_f64(r.level),
            fmt_f64(m.bias),
            fmt_f64(m.std),
            fmt_f64(m.rmse),
            fmt_f64(m.coverage),
            fmt_f64(m.avg_ci_length),
            m.completed.to_string(),
            m.failed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, HarnessError> {
    s.parse().map_err(|_| HarnessError::Schema(format!("bad {what} value '{s}'")))
}

fn method(s: &str) -> Result<EstimatorId, HarnessError> {
    s.parse().map_err(|_| HarnessError::Schema(format!("unknown method '{s}'")))
}

pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != SUMMARY_HEADER {
        return Err(HarnessError::Schema(format!("unexpected summary header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                design: rec[0].to_owned(),
                tau: parse(&rec[2], "tau")?,
                reps: parse(&rec[3], "reps")?,
                level: parse(&rec[4], "level")?,
                summary: MethodSummary {
                    method: method(&rec[1])?,
                    bias: parse(&rec[5], "Bias")?,
                    std: parse(&rec[6], "STD")?,
                    rmse: parse(&rec[7], "RMSE")?,
                    coverage: parse(&rec[8], "coverage")?,
                    avg_ci_length: parse(&rec[9], "length")?,
                    completed: parse(&rec[10], "completed")?,
                    failed: parse(&rec[11], "failed")?,
                },
            })
        })
        .collect()
}

const ESTIMATE_HEADER: [&str; 7] = ["method", "tau_hat", "var_hat", "ci_low", "ci_high", "level", "lambda_used"];

pub fn write_estimate_csv<W: Write>(w: W, reports: &[EstimateReport]) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(ESTIMATE_HEADER)?;
    for r in reports {
        wtr.write_record([
            r.method.name().to_owned(),
            fmt_f64(r.tau_hat),
            fmt_f64(r.var_hat),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            fmt_f64(r.level),
            fmt_f64(r.lambda_used),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_estimate_csv<R: Read>(r: R) -> Result<Vec<EstimateReport>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != ESTIMATE_HEADER {
        return Err(HarnessError::Schema(format!("unexpected estimate header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(EstimateReport {
                method: method(&rec[0])?,
                tau_hat: parse(&rec[1], "tau_hat")?,
                var_hat: parse(&rec[2], "var_hat")?,
                ci_low: parse(&rec[3], "ci_low")?,
                ci_high: parse(&rec[4], "ci_high")?,
                level: parse(&rec[5], "level")?,
                lambda_used: parse(&rec[6], "lambda_used")?,
            })
        })
        .collect()
}
