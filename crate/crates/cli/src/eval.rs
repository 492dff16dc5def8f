//! Evaluation on the held-out sequential split.

use std::collections::BTreeMap;
use std::path::Path;

use pirl_core::config::Config;
use pirl_core::datasets::{Dataset, Split};
use pirl_core::demos::OdometryRecord;
use pirl_core::irl::{ed, evd, log_likelihood, odometry_opd, opd};
use pirl_core::planner::FEATURE_NAMES;
use serde::{Deserialize, Serialize};

use crate::collect::odometry_lap;
use crate::error::{require, CliError, Result};
use crate::method::Method;
use crate::model::{Model, Predictor};
use crate::output::{header, num, opt, write_csv, write_json};
use crate::train::METRICS_FILE;

pub const CYCLES_FILE: &str = "cycles.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRAINING_CURVE_FILE: &str = "training_metrics.csv";
pub const HISTOGRAM_BINS: usize = 10;

pub const CYCLE_HEADER: [&str; 8] = [
    "cycle",
    "scenario",
    "log_likelihood",
    "evd",
    "ed",
    "opd",
    "demo_distance",
    "odometry_opd",
];

/// Metrics of one evaluated cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRow {
    pub cycle: u64,
    pub scenario: u64,
    pub log_likelihood: f64,
    /// `None` when the demonstration value is degenerate.
    pub evd: Option<f64>,
    pub ed: f64,
    pub opd: f64,
    /// Re-projection distance of the demonstration to the expert odometry.
    pub demo_distance: f64,
    /// Distance of the optimal policy to the expert odometry, when available.
    pub odometry_opd: Option<f64>,
}

impl CycleRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.cycle.to_string(),
            self.scenario.to_string(),
            num(self.log_likelihood),
            opt(self.evd),
            num(self.ed),
            num(self.opd),
            num(self.demo_distance),
            opt(self.odometry_opd),
        ]
    }

    pub fn from_record(r: &csv::StringRecord) -> Result<Self> {
        let field = |i: usize| {
            r.get(i)
                .ok_or_else(|| CliError::format("cycles", format!("missing column {i}")))
        };
        let float = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|e| CliError::format("cycles", e))
        };
        let maybe = |i: usize| -> Result<Option<f64>> {
            let s = field(i)?;
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| CliError::format("cycles", e))
            }
        };
        let int = |i: usize| -> Result<u64> {
            field(i)?.parse().map_err(|e| CliError::format("cycles", e))
        };
        Ok(CycleRow {
            cycle: int(0)?,
            scenario: int(1)?,
            log_likelihood: float(2)?,
            evd: maybe(3)?,
            ed: float(4)?,
            opd: float(5)?,
            demo_distance: float(6)?,
            odometry_opd: maybe(7)?,
        })
    }
}

/// Aggregates over the cycle rows of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub cycles: usize,
    pub log_likelihood: f64,
    pub evd: f64,
    pub evd_degenerate: usize,
    pub ed: f64,
    pub opd: f64,
    /// OPD counts in equal bins over `[0, 1]`.
    pub opd_histogram: Vec<usize>,
    /// Fraction of cycles whose optimal policy is no closer to the odometry
    /// than the demonstration is.
    pub demonstration_floor: Option<f64>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n > 0 {
        sum / n as f64
    } else {
        f64::NAN
    }
}

pub fn histogram(values: impl IntoIterator<Item = f64>, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

impl Summary {
    pub fn from_rows(method: Method, rows: &[CycleRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(CliError::NoCycles(format!("{method} evaluation")));
        }
        let floor: Vec<bool> = rows
            .iter()
            .filter_map(|r| r.odometry_opd.map(|d| d >= r.demo_distance))
            .collect();
        Ok(Summary {
            method,
            cycles: rows.len(),
            log_likelihood: mean(rows.iter().map(|r| r.log_likelihood)),
            evd: mean(rows.iter().filter_map(|r| r.evd)),
            evd_degenerate: rows.iter().filter(|r| r.evd.is_none()).count(),
            ed: mean(rows.iter().map(|r| r.ed)),
            opd: mean(rows.iter().map(|r| r.opd)),
            opd_histogram: histogram(rows.iter().map(|r| r.opd), HISTOGRAM_BINS),
            demonstration_floor: (!floor.is_empty())
                .then(|| floor.iter().filter(|b| **b).count() as f64 / floor.len() as f64),
        })
    }
}

pub fn read_cycles(path: &Path) -> Result<Vec<CycleRow>> {
    require(path)?;
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .records()
        .map(|r| CycleRow::from_record(&r?))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub rows: Vec<CycleRow>,
    pub summary: Summary,
}

pub fn eval(
    config: &Config,
    manifest: &Path,
    model: &Model,
    history: usize,
    out: &Path,
) -> Result<EvalOutcome> {
    let hash = config.data_hash();
    if model.manifest.data_hash != hash {
        return Err(pirl_core::Error::IncompatibleDataset {
            manifest: model.manifest.data_hash.clone(),
            config: hash,
        }
        .into());
    }
    require(manifest)?;
    let ds = Dataset::open(manifest)?;
    let records = ds.load(Split::Test, Some(&hash), None)?;
    if records.is_empty() {
        return Err(CliError::NoCycles(format!(
            "test split of {}",
            manifest.display()
        )));
    }
    let mut odometry = BTreeMap::new();
    for (name, path) in ds.manifest.odometry.iter().zip(ds.odometry_paths()) {
        let lap = odometry_lap(name)
            .ok_or_else(|| CliError::format("manifest", format!("odometry file {name}")))?;
        if records.iter().any(|r| r.scenario_id == lap) {
            require(&path)?;
            odometry.insert(lap, OdometryRecord::read_csv(std::fs::File::open(&path)?)?);
        }
    }

    let w = &config.distance;
    let mut predictor = Predictor::new(model, history)?;
    let mut rows = Vec::with_capacity(records.len());
    let (mut thetas, mut weights, mut attention) = (Vec::new(), Vec::new(), Vec::new());
    let mut previous: Option<u64> = None;
    for r in &records {
        if previous.is_none_or(|c| c + 1 != r.cycle) {
            predictor.reset();
        }
        previous = Some(r.cycle);
        let p = predictor.next(&r.set)?;
        let (set, demo, theta) = (&r.set, r.demo.index, &p.theta);
        rows.push(CycleRow {
            cycle: r.cycle,
            scenario: r.scenario_id,
            log_likelihood: log_likelihood(set, demo, theta)?,
            evd: evd(set, demo, theta)?,
            ed: ed(set, demo, theta, w)?,
            opd: opd(set, demo, theta, w)?,
            demo_distance: r.demo.distance,
            odometry_opd: odometry
                .get(&r.scenario_id)
                .map(|o| odometry_opd(set, o, theta, w))
                .transpose()?,
        });
        thetas.push((r.cycle, p.theta));
        if let Some(a) = p.attention {
            attention.push((r.cycle, a));
        }
        if model.method().temporal() {
            weights.push((r.cycle, p.weights.unwrap_or_default()));
        }
    }
    let summary = Summary::from_rows(model.method(), &rows)?;

    std::fs::create_dir_all(out)?;
    let cycle_header: Vec<String> = CYCLE_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(
        &out.join(CYCLES_FILE),
        &cycle_header,
        rows.iter().map(CycleRow::to_record),
    )?;
    write_vectors(
        &out.join("theta.csv"),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        &thetas,
    )?;
    if model.method().temporal() {
        write_vectors(
            &out.join("weights.csv"),
            header(&[], "w", history),
            &weights,
        )?;
    }
    if let Some(n) = attention.first().map(|(_, a)| a.len()) {
        write_vectors(
            &out.join("attention.csv"),
            header(&[], "slot", n),
            &attention,
        )?;
    }
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    if let Some(dir) = &model.dir {
        let curve = dir.join(METRICS_FILE);
        if curve.exists() {
            std::fs::copy(curve, out.join(TRAINING_CURVE_FILE))?;
        }
    }
    log::info!(
        "{}: {} cycles, ED {:.4}, OPD {:.4}",
        summary.method,
        summary.cycles,
        summary.ed,
        summary.opd
    );
    Ok(EvalOutcome { rows, summary })
}

/// Writes `cycle` followed by one vector per row.
pub fn write_vectors(path: &Path, columns: Vec<String>, rows: &[(u64, Vec<f64>)]) -> Result<()> {
    let header: Vec<String> = std::iter::once("cycle".to_string())
        .chain(columns)
        .collect();
    write_csv(
        path,
        &header,
        rows.iter().map(|(c, v)| {
            std::iter::once(c.to_string())
                .chain(v.iter().map(|x| num(*x)))
                .collect::<Vec<_>>()
        }),
    )
}
