use std::io::Write;

use finslerkit_core::GeodesicPath;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported value with no threshold attached.
    Info,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub residual: f64,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl Record {
    /// Passes when `residual <= tolerance`.
    pub fn below(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let verdict = if residual <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Record { name: name.into(), residual, tolerance: Some(tolerance), verdict, detail: None }
    }

    /// Passes when `residual >= tolerance`.
    pub fn above(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let verdict = if residual >= tolerance { Verdict::Pass } else { Verdict::Fail };
        Record { name: name.into(), residual, tolerance: Some(tolerance), verdict, detail: None }
    }

    pub fn info(name: impl Into<String>, residual: f64) -> Self {
        Record { name: name.into(), residual, tolerance: None, verdict: Verdict::Info, detail: None }
    }

    pub fn outcome(name: impl Into<String>, residual: f64, tolerance: Option<f64>, ok: bool) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Record { name: name.into(), residual, tolerance, verdict, detail: None }
    }

    /// A module error recorded as a failed check.
    pub fn error(name: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Record {
            name: name.into(),
            residual: f64::NAN,
            tolerance: None,
            verdict: Verdict::Fail,
            detail: Some(serde_json::Value::String(message.to_string())),
        }
    }

    pub fn with_detail<T: Serialize>(mut self, detail: &T) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub name: String,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub scenario: ScenarioRef,
    pub seed: u64,
    pub records: Vec<Record>,
    pub passed: bool,
    #[serde(skip)]
    pub paths: Vec<GeodesicPath>,
}

impl Report {
    pub fn new(command: &str, scenario: ScenarioRef, seed: u64, records: Vec<Record>) -> Self {
        let passed = records.iter().all(|r| r.verdict != Verdict::Fail);
        Report { command: command.into(), scenario, seed, records, passed, paths: Vec::new() }
    }

    pub fn record(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Pretty JSON with a trailing newline; non-finite residuals become null.
pub fn to_json(report: &Report) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_csv<W: Write>(report: &Report, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if report.command == "geodesic" {
        if let Some(path) = report.paths.first() {
            let n = path.samples.first().map_or(0, |s| s.x.len());
            let mut header = vec!["t".to_string()];
            header.extend((1..=n).map(|i| format!("x{i}")));
            header.extend((1..=n).map(|i| format!("v{i}")));
            w.write_record(&header)?;
            for s in &path.samples {
                let mut row = vec![format!("{}", s.t)];
                row.extend(s.x.iter().chain(&s.v).map(|v| format!("{v}")));
                w.write_record(&row)?;
            }
            w.flush()?;
            return Ok(());
        }
    }
    w.write_record(["name", "residual", "tolerance", "verdict"])?;
    for r in &report.records {
        let tol = r.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
        let verdict = serde_json::to_value(r.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        w.write_record([r.name.clone(), format!("{:e}", r.residual), tol, verdict])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let records = vec![
            Record::below("a", 1e-12, 1e-8),
            Record::info("b", 3.0),
            Record::error("c", "boom"),
        ];
        Report::new("spray", ScenarioRef { name: "s".into(), digest: "d".into() }, 1, records)
    }

    #[test]
    fn any_failure_fails_report() {
        let r = sample();
        assert!(!r.passed);
        assert_eq!(r.record("b").unwrap().verdict, Verdict::Info);
        let ok = Report::new("spray", r.scenario.clone(), 1, vec![Record::above("x", 2.0, 1.0)]);
        assert!(ok.passed);
    }

    #[test]
    fn nan_residual_serializes_as_null() {
        let text = to_json(&sample()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["records"][2]["residual"].is_null());
        assert_eq!(v["records"][2]["detail"], "boom");
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn csv_rows_follow_records() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "name,residual,tolerance,verdict");
        assert_eq!(lines[1], "a,1e-12,1e-8,pass");
        assert_eq!(lines[2], "b,3e0,,info");
    }
}
