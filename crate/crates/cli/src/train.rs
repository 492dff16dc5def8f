//! Model training.

use std::path::{Path, PathBuf};

use pirl_core::config::Config;
use pirl_core::datasets::{CycleRecord, Dataset, Split};
use pirl_core::irl::{train_lirl, EpochMetrics, Evaluation};
use pirl_core::nn::{train_policy_net, train_tan, NnConfig, NnEpochMetrics, TanConfig, TanDims};

use crate::collect::SEQUENCE;
use crate::error::{require, CliError, Result};
use crate::method::Method;
use crate::model::Model;
use crate::output::{num, opt, write_csv};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TAN_METRICS_FILE: &str = "tan_metrics.csv";

#[derive(Debug, Clone)]
pub struct TrainRequest<'a> {
    pub config: &'a Config,
    pub manifest: &'a Path,
    /// Sequential dataset for the temporal network; defaults to the sibling
    /// `expert.json` of `manifest`.
    pub sequence: Option<&'a Path>,
    pub method: Method,
    pub history: usize,
    pub seed: u64,
    pub out: &'a Path,
}

/// One row of a training curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub epoch: usize,
    pub loss: f64,
    pub attention_loss: f64,
    pub evd: f64,
    pub validation: Option<Evaluation>,
}

impl From<&EpochMetrics> for CurveRow {
    fn from(m: &EpochMetrics) -> Self {
        CurveRow {
            epoch: m.epoch,
            loss: -m.log_likelihood,
            attention_loss: 0.0,
            evd: m.evd,
            validation: m.validation,
        }
    }
}

impl From<&NnEpochMetrics> for CurveRow {
    fn from(m: &NnEpochMetrics) -> Self {
        CurveRow {
            epoch: m.epoch,
            loss: m.loss,
            attention_loss: m.attention_loss,
            evd: m.evd,
            validation: m.validation,
        }
    }
}

pub const CURVE_HEADER: [&str; 9] = [
    "epoch",
    "loss",
    "attention_loss",
    "evd",
    "val_log_likelihood",
    "val_demo_probability",
    "val_evd",
    "val_ed",
    "val_opd",
];

fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let header: Vec<String> = CURVE_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            let v = r.validation;
            vec![
                r.epoch.to_string(),
                num(r.loss),
                num(r.attention_loss),
                num(r.evd),
                opt(v.map(|e| e.log_likelihood)),
                opt(v.map(|e| e.demo_probability)),
                opt(v.map(|e| e.evd)),
                opt(v.map(|e| e.ed)),
                opt(v.map(|e| e.opd)),
            ]
        }),
    )
}

fn load_split(path: &Path, split: Split, hash: &str) -> Result<(Dataset, Vec<CycleRecord>)> {
    require(path)?;
    let ds = Dataset::open(path)?;
    let records = ds.load(split, Some(hash), None)?;
    Ok((ds, records))
}

pub fn train(req: &TrainRequest) -> Result<Model> {
    let config = req.config;
    let hash = config.data_hash();
    let w = &config.distance;
    let (ds, train) = load_split(req.manifest, Split::Train, &hash)?;
    if train.is_empty() {
        return Err(CliError::NoCycles(format!(
            "training split of {}",
            req.manifest.display()
        )));
    }
    let val = ds.load(Split::Val, Some(&hash), None)?;
    std::fs::create_dir_all(req.out)?;
    let model = match req.method.architecture() {
        None => {
            let run = train_lirl(&train, &val, &config.lirl, req.seed, w)?;
            write_curve(
                &req.out.join(METRICS_FILE),
                &run.metrics.iter().map(CurveRow::from).collect::<Vec<_>>(),
            )?;
            Model::linear(req.method, &hash, req.seed, run.theta.theta)
        }
        Some(arch) => {
            let lambda_att = if req.method.supervised_attention() {
                config.nn.lambda_att
            } else {
                0.0
            };
            let nn = NnConfig {
                lambda_att,
                ..config.nn.clone()
            };
            let run = train_policy_net(arch, &train, &val, &nn, req.seed, w)?;
            log::info!(
                "{}: loss {:.4} after {} epochs",
                req.method,
                run.metrics.last().map_or(f64::NAN, |m| m.loss),
                nn.epochs
            );
            write_curve(
                &req.out.join(METRICS_FILE),
                &run.metrics.iter().map(CurveRow::from).collect::<Vec<_>>(),
            )?;
            let tan = if req.method.temporal() {
                let path: PathBuf = match req.sequence {
                    Some(p) => p.to_path_buf(),
                    None => ds.dir.join(format!("{SEQUENCE}.json")),
                };
                let (_, sequence) = load_split(&path, Split::Train, &hash)?;
                if sequence.is_empty() {
                    return Err(CliError::NoCycles(format!(
                        "training split of {}",
                        path.display()
                    )));
                }
                let tan_config = TanConfig {
                    dims: TanDims {
                        history: req.history,
                        ..config.tan.dims
                    },
                    ..config.tan.clone()
                };
                let tan_run = train_tan(&sequence, &run.net, &tan_config, req.seed)?;
                write_curve(
                    &req.out.join(TAN_METRICS_FILE),
                    &tan_run
                        .metrics
                        .iter()
                        .map(CurveRow::from)
                        .collect::<Vec<_>>(),
                )?;
                Some(tan_run.tan)
            } else {
                None
            };
            Model::net(req.method, &hash, req.seed, run.net, tan)
        }
    };
    model.save(req.out)?;
    Ok(model)
}
