//! Trained model artifacts and the per-cycle reward prediction protocol.
//!
//! A model directory holds `model.json`, `policy.bin` (the linear weights as a
//! single `theta` tensor for LIRL, otherwise the policy network) and, for the
//! temporal methods, `tan.bin`.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use pirl_core::nn::{
    bootstrap_history, HistorySlot, NetDims, Params, PolicyNet, Tan, TanDims, Tensor,
};
use pirl_core::planner::{PolicySet, K};
use serde::{Deserialize, Serialize};

use crate::error::{require, CliError, Result};
use crate::method::Method;

pub const MODEL_FILE: &str = "model.json";
pub const POLICY_FILE: &str = "policy.bin";
pub const TAN_FILE: &str = "tan.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub method: Method,
    /// Hash of the configuration the training data was collected with.
    pub data_hash: String,
    pub seed: u64,
    pub dims: Option<NetDims>,
    pub tan_dims: Option<TanDims>,
}

/// A loaded model of any method.
#[derive(Debug, Clone)]
pub struct Model {
    pub manifest: ModelManifest,
    pub kind: ModelKind,
    /// Directory the model was loaded from.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    Linear(Vec<f64>),
    Net(PolicyNet),
    Temporal(PolicyNet, Tan),
}

fn read_params(path: &Path) -> Result<Params> {
    require(path)?;
    Ok(Params::from_bytes(&std::fs::read(path)?)?)
}

fn write_params(path: &Path, params: &Params) -> Result<()> {
    std::fs::write(path, params.to_bytes())?;
    Ok(())
}

impl Model {
    pub fn linear(method: Method, data_hash: &str, seed: u64, theta: Vec<f64>) -> Self {
        let manifest = ModelManifest {
            method,
            data_hash: data_hash.to_string(),
            seed,
            dims: None,
            tan_dims: None,
        };
        Model {
            manifest,
            kind: ModelKind::Linear(theta),
            dir: None,
        }
    }

    pub fn net(
        method: Method,
        data_hash: &str,
        seed: u64,
        net: PolicyNet,
        tan: Option<Tan>,
    ) -> Self {
        let manifest = ModelManifest {
            method,
            data_hash: data_hash.to_string(),
            seed,
            dims: Some(net.dims),
            tan_dims: tan.as_ref().map(|t| t.dims),
        };
        let kind = match tan {
            Some(tan) => ModelKind::Temporal(net, tan),
            None => ModelKind::Net(net),
        };
        Model {
            manifest,
            kind,
            dir: None,
        }
    }

    pub fn method(&self) -> Method {
        self.manifest.method
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(dir.join(MODEL_FILE), text)?;
        match &self.kind {
            ModelKind::Linear(theta) => {
                let mut p = Params::default();
                p.push("theta", Tensor::vector(theta.clone()));
                write_params(&dir.join(POLICY_FILE), &p)
            }
            ModelKind::Net(net) => write_params(&dir.join(POLICY_FILE), &net.params),
            ModelKind::Temporal(net, tan) => {
                write_params(&dir.join(POLICY_FILE), &net.params)?;
                write_params(&dir.join(TAN_FILE), &tan.params)
            }
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_FILE);
        require(&path)?;
        let manifest: ModelManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        let params = read_params(&dir.join(POLICY_FILE))?;
        let method = manifest.method;
        let kind = match method.architecture() {
            None => {
                let theta = params
                    .get("theta")
                    .ok_or_else(|| CliError::format("model", "missing theta"))?;
                if theta.data.len() != K {
                    return Err(CliError::format(
                        "model",
                        format!("theta has {} weights", theta.data.len()),
                    ));
                }
                ModelKind::Linear(theta.data.clone())
            }
            Some(arch) => {
                let dims = manifest
                    .dims
                    .ok_or_else(|| CliError::format("model", "missing network dimensions"))?;
                let net = PolicyNet { arch, dims, params };
                if method.temporal() {
                    let dims = manifest
                        .tan_dims
                        .ok_or_else(|| CliError::format("model", "missing temporal dimensions"))?;
                    ModelKind::Temporal(
                        net,
                        Tan {
                            dims,
                            params: read_params(&dir.join(TAN_FILE))?,
                        },
                    )
                } else {
                    ModelKind::Net(net)
                }
            }
        };
        Ok(Model {
            manifest,
            kind,
            dir: Some(dir.to_path_buf()),
        })
    }
}

/// Reward weights predicted for one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Weights handed to the planner.
    pub theta: Vec<f64>,
    /// Policy attention of the current cycle, when the network has one.
    pub attention: Option<Vec<f64>>,
    /// Temporal weights over the history, oldest slot first.
    pub weights: Option<Vec<f64>>,
}

/// Stateful per-cycle prediction over a history of `history` cycles.
///
/// Temporal models mix the previous cycles' predictions with the temporal
/// network (the first cycle of a sequence uses the raw prediction). Network
/// baselines use the arithmetic mean of the last `history` raw predictions;
/// the linear model's weights are constant.
pub struct Predictor<'a> {
    model: &'a Model,
    history: usize,
    recent: VecDeque<Vec<f64>>,
    slots: VecDeque<HistorySlot>,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a Model, history: usize) -> Result<Self> {
        if history == 0 {
            return Err(CliError::Usage("history must be at least 1".into()));
        }
        if let ModelKind::Temporal(_, tan) = &model.kind {
            if tan.dims.history != history {
                return Err(CliError::Usage(format!(
                    "history {history} differs from the temporal network's {}",
                    tan.dims.history
                )));
            }
        }
        Ok(Self {
            model,
            history,
            recent: VecDeque::new(),
            slots: VecDeque::new(),
        })
    }

    /// Forgets the history, for the start of a new sequence.
    pub fn reset(&mut self) {
        self.recent.clear();
        self.slots.clear();
    }

    pub fn next(&mut self, set: &PolicySet) -> pirl_core::Result<Prediction> {
        match &self.model.kind {
            ModelKind::Linear(theta) => Ok(Prediction {
                theta: theta.clone(),
                attention: None,
                weights: None,
            }),
            ModelKind::Net(net) => {
                let out = net.infer(set)?;
                Ok(self.averaged(out.theta, out.attention))
            }
            ModelKind::Temporal(net, tan) => {
                let out = net.infer(set)?;
                let (theta, weights) = if self.slots.is_empty() {
                    (out.theta.clone(), None)
                } else {
                    let slots: Vec<HistorySlot> = self.slots.iter().cloned().collect();
                    let mixed = tan.forward(&bootstrap_history(&slots, self.history)?)?;
                    (mixed.theta, Some(mixed.weights))
                };
                if self.slots.len() == self.history {
                    self.slots.pop_front();
                }
                self.slots.push_back(HistorySlot {
                    context: out.context,
                    theta: out.theta,
                });
                Ok(Prediction {
                    theta,
                    attention: out.attention,
                    weights,
                })
            }
        }
    }

    fn averaged(&mut self, raw: Vec<f64>, attention: Option<Vec<f64>>) -> Prediction {
        if self.recent.len() == self.history {
            self.recent.pop_front();
        }
        self.recent.push_back(raw);
        let n = self.recent.len() as f64;
        let mut theta = vec![0.0; self.recent[0].len()];
        for t in &self.recent {
            theta.iter_mut().zip(t).for_each(|(a, b)| *a += b / n);
        }
        Prediction {
            theta,
            attention,
            weights: None,
        }
    }
}
