//! Deterministic file output: CSV tables and pretty JSON.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Shortest round-trip decimal form; empty for a missing value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes a header row and data rows as CSV.
pub fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn header(fixed: &[&str], prefix: &str, n: usize) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain((0..n).map(|i| format!("{prefix}{i}")))
        .collect()
}
