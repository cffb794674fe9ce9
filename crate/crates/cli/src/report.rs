use std::path::Path;

use emobias::report::{stable_json, ReportFormat};
use emobias::Result;
use serde::Serialize;

/// A report renders as stable JSON (via `Serialize`), flat CSV, and a
/// right-padded table for stdout.
pub trait Render: Serialize {
    fn csv(&self) -> String;
    fn table(&self) -> String;
}

pub fn render<R: Render>(report: &R, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => stable_json(report)?,
        ReportFormat::Csv => report.csv(),
        ReportFormat::Table => report.table(),
    })
}

/// Print the table to stdout and, when `out` is given, write the report
/// there in the requested format.
pub fn emit<R: Render>(report: &R, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    print!("{}", report.table());
    if let Some(path) = out {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, render(report, format)?)?;
    }
    Ok(())
}

/// Percent with two decimals for tables.
pub fn pct(v: f64) -> String {
    format!("{v:.2}")
}
