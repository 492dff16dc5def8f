//! Aggregation of evaluation runs into summary tables.
//!
//! Every number is recomputed from the runs' `cycles.csv` rows; the method
//! name is taken from each run's `summary.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{require, CliError, Result};
use crate::eval::{
    read_cycles, Summary, CYCLES_FILE, HISTOGRAM_BINS, SUMMARY_FILE, TRAINING_CURVE_FILE,
};
use crate::method::Method;
use crate::output::{num, write_csv, write_json};
use crate::train::CURVE_HEADER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Run directory name.
    pub run: String,
    pub method: Method,
    pub cycles: usize,
    pub ed: f64,
    pub opd: f64,
    pub evd: f64,
    pub log_likelihood: f64,
}

#[derive(Deserialize)]
struct MethodOnly {
    method: Method,
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn report(runs: &[impl AsRef<Path>], out: &Path) -> Result<Vec<TableRow>> {
    let mut table = Vec::new();
    let mut histogram = Vec::new();
    let mut curves: Vec<Vec<String>> = Vec::new();
    for dir in runs {
        let dir = dir.as_ref();
        let summary_path = dir.join(SUMMARY_FILE);
        require(&summary_path)?;
        let method =
            serde_json::from_str::<MethodOnly>(&std::fs::read_to_string(&summary_path)?)?.method;
        let rows = read_cycles(&dir.join(CYCLES_FILE))?;
        let s = Summary::from_rows(method, &rows)
            .map_err(|_| CliError::NoCycles(format!("run {}", dir.display())))?;
        let name = run_name(dir);
        for (b, count) in s.opd_histogram.iter().enumerate() {
            let width = 1.0 / HISTOGRAM_BINS as f64;
            histogram.push(vec![
                name.clone(),
                method.to_string(),
                num(b as f64 * width),
                num((b + 1) as f64 * width),
                count.to_string(),
            ]);
        }
        let curve = dir.join(TRAINING_CURVE_FILE);
        if curve.exists() {
            let mut reader = csv::Reader::from_path(&curve)?;
            for r in reader.records() {
                let r = r?;
                curves.push(
                    [name.clone(), method.to_string()]
                        .into_iter()
                        .chain(r.iter().map(str::to_string))
                        .collect(),
                );
            }
        }
        table.push(TableRow {
            run: name,
            method,
            cycles: s.cycles,
            ed: s.ed,
            opd: s.opd,
            evd: s.evd,
            log_likelihood: s.log_likelihood,
        });
    }
    if table.is_empty() {
        return Err(CliError::NoCycles("no runs given".into()));
    }
    std::fs::create_dir_all(out)?;
    let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    write_csv(
        &out.join("table.csv"),
        &strings(&[
            "run",
            "method",
            "cycles",
            "ed",
            "opd",
            "evd",
            "log_likelihood",
        ]),
        table.iter().map(|r| {
            vec![
                r.run.clone(),
                r.method.to_string(),
                r.cycles.to_string(),
                num(r.ed),
                num(r.opd),
                num(r.evd),
                num(r.log_likelihood),
            ]
        }),
    )?;
    write_json(&out.join("table.json"), &table)?;
    write_csv(
        &out.join("opd_histogram.csv"),
        &strings(&["run", "method", "bin_lo", "bin_hi", "count"]),
        histogram,
    )?;
    let curve_header: Vec<String> = ["run", "method"]
        .iter()
        .chain(CURVE_HEADER.iter())
        .map(|s| s.to_string())
        .collect();
    write_csv(&out.join("curves.csv"), &curve_header, curves)?;
    Ok(table)
}
