use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::suite::config::SuiteConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not applicable to this configuration; counts as passing.
    Skipped,
    /// The check raised an error; counts as failing.
    Error,
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub status: CheckStatus,
    /// Largest residual over the tested points; absent for skipped or
    /// failed-to-run checks and for non-finite values.
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub points: usize,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteVerdict {
    Pass,
    Fail,
}

/// Outcome of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool_version: String,
    pub verdict: SuiteVerdict,
    pub config: SuiteConfig,
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    /// Assembles a report; the verdict passes iff every record passes.
    pub fn new(config: SuiteConfig, checks: Vec<CheckRecord>) -> VerificationReport {
        let verdict = if checks.iter().all(|c| c.pass) {
            SuiteVerdict::Pass
        } else {
            SuiteVerdict::Fail
        };
        VerificationReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            verdict,
            config,
            checks,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == SuiteVerdict::Pass
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<VerificationReport> {
        serde_json::from_str(text)
    }

    pub fn to_csv(&self) -> std::io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "check",
            "max_residual",
            "tolerance",
            "pass",
            "points",
            "seconds",
        ])?;
        for c in &self.checks {
            w.write_record([
                c.check.clone(),
                c.max_residual.map(|r| format!("{r:e}")).unwrap_or_default(),
                format!("{:e}", c.tolerance),
                c.pass.to_string(),
                c.points.to_string(),
                format!("{:.6}", c.seconds),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!(
                "unknown report format {other:?} (expected json or csv)"
            )),
        }
    }
}

/// Writes the report to `destination`, or to standard output when `None`.
pub fn emit_report(
    report: &VerificationReport,
    format: ReportFormat,
    destination: Option<&Path>,
) -> std::io::Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv()?,
    };
    match destination {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
