//! Training loops for the policy networks and the temporal attention network.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::models::{
    attention_slot_distances, bootstrap_history, Architecture, HistorySlot, NetDims, PolicyInput,
    PolicyNet, PolicyOutput, Tan, TanDims,
};
use super::params::Params;
use crate::datasets::CycleRecord;
use crate::demos::DistanceWeights;
use crate::error::{Error, Result};
use crate::irl::{
    evaluate_records, evd, log_likelihood, maxent_gradient, normalized_distances, Evaluation,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimiser state over a flat parameter vector; steps descend the gradient.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    step: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, step: f64, n: usize) -> Self {
        Self {
            kind,
            step,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            Optimizer::Sgd => params
                .iter_mut()
                .zip(grad)
                .for_each(|(p, g)| *p -= self.step * g),
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                self.t += 1;
                let (c1, c2) = (1.0 - beta1.powi(self.t), 1.0 - beta2.powi(self.t));
                for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    *p -= self.step * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + epsilon);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnConfig {
    pub dims: NetDims,
    pub epochs: usize,
    pub step: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Attention-loss coefficient of the semi-supervised variants.
    pub lambda_att: f64,
    pub validate_every: usize,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            dims: NetDims::default(),
            epochs: 100,
            step: 3e-3,
            batch_size: 8,
            optimizer: Optimizer::adam(),
            lambda_att: 0.1,
            validate_every: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TanConfig {
    pub dims: TanDims,
    pub epochs: usize,
    pub step: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
}

impl Default for TanConfig {
    fn default() -> Self {
        Self {
            dims: TanDims::default(),
            epochs: 40,
            step: 1e-3,
            batch_size: 32,
            optimizer: Optimizer::adam(),
        }
    }
}

/// Metrics after one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnEpochMetrics {
    pub epoch: usize,
    /// Mean negative log-likelihood over the epoch's batches.
    pub loss: f64,
    /// Mean attention loss over the epoch's batches (zero when unused).
    pub attention_loss: f64,
    /// Mean expected value difference of the training records, each under the
    /// weights predicted when its batch was processed.
    pub evd: f64,
    pub validation: Option<Evaluation>,
}

/// Gradient of one record's objective with respect to the flat parameters,
/// with its log-likelihood and attention loss.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordGradient {
    pub gradient: Vec<f64>,
    pub log_likelihood: f64,
    pub attention_loss: f64,
    /// `None` when the demonstration value is degenerate.
    pub evd: Option<f64>,
}

fn negate(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

/// Gradient of `-ln p(pi^D) + lambda * L_att` for one record.
pub fn policy_net_gradient(
    net: &PolicyNet,
    record: &CycleRecord,
    lambda_att: f64,
    w: &DistanceWeights,
) -> Result<RecordGradient> {
    let input = PolicyInput::from_set(&record.set, &net.dims)?;
    let t = net.trace(&input)?;
    let theta = t.graph.value(t.theta).data.clone();
    let demo = record.demo.index;
    let ll = log_likelihood(&record.set, demo, &theta)?;
    let value_difference = evd(&record.set, demo, &theta)?;
    let theta_seed = negate(maxent_gradient(&record.set, demo, &theta)?);
    let mut seeds: Vec<(super::graph::Var, Vec<f64>)> = vec![(t.theta, theta_seed)];
    let mut att_loss = 0.0;
    if let (Some(a), true) = (t.attention, lambda_att != 0.0) {
        let d =
            attention_slot_distances(&input.slots, &normalized_distances(&record.set, demo, w)?)?;
        att_loss = d
            .iter()
            .zip(&t.graph.value(a).data)
            .map(|(x, y)| x * y)
            .sum();
        seeds.push((a, d.iter().map(|x| lambda_att * x).collect()));
    }
    let seeds: Vec<_> = seeds.iter().map(|(v, s)| (*v, s.as_slice())).collect();
    let grads = t.graph.backward(&seeds)?;
    Ok(RecordGradient {
        gradient: net.params.gradient(&t.params, &grads),
        log_likelihood: ll,
        attention_loss: att_loss,
        evd: value_difference,
    })
}

fn map_records<T: Send, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Forward pass over every record, in record order.
pub fn predict(net: &PolicyNet, records: &[CycleRecord]) -> Result<Vec<PolicyOutput>> {
    map_records(records.len(), |i| net.infer(&records[i].set))
}

/// Sums per-record gradients in order and returns their mean.
fn mean_gradient(parts: Vec<RecordGradient>, n: usize) -> (Vec<f64>, f64, f64) {
    let mut g = vec![0.0; n];
    let (mut ll, mut att) = (0.0, 0.0);
    let count = parts.len().max(1) as f64;
    for p in parts {
        g.iter_mut()
            .zip(&p.gradient)
            .for_each(|(a, b)| *a += b / count);
        ll += p.log_likelihood / count;
        att += p.attention_loss / count;
    }
    (g, ll, att)
}

fn tally_evd(parts: &[RecordGradient], sum: &mut f64, n: &mut usize) {
    for x in parts.iter().filter_map(|p| p.evd) {
        *sum += x;
        *n += 1;
    }
}

fn mean_or_nan(sum: f64, n: usize) -> f64 {
    if n > 0 {
        sum / n as f64
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetRun {
    pub net: PolicyNet,
    pub metrics: Vec<NnEpochMetrics>,
}

/// Mini-batch training of a policy network on the maximum-entropy objective,
/// optionally with the attention loss.
pub fn train_policy_net(
    arch: Architecture,
    train: &[CycleRecord],
    validation: &[CycleRecord],
    config: &NnConfig,
    seed: u64,
    w: &DistanceWeights,
) -> Result<PolicyNetRun> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut net = PolicyNet::new(arch, config.dims, seed)?;
    let mut flat = net.params.flat();
    let mut opt = OptimizerState::new(config.optimizer, config.step, flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut att, mut batches) = (0.0, 0.0, 0usize);
        let (mut evd_sum, mut evd_n) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let parts = map_records(chunk.len(), |j| {
                policy_net_gradient(&net, &train[chunk[j]], config.lambda_att, w)
            })?;
            tally_evd(&parts, &mut evd_sum, &mut evd_n);
            let (g, ll, a) = mean_gradient(parts, flat.len());
            if !ll.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            opt.apply(&mut flat, &g);
            net.params.set_flat(&flat)?;
            loss -= ll;
            att += a;
            batches += 1;
        }
        let validation = if !validation.is_empty()
            && config.validate_every > 0
            && epoch % config.validate_every == 0
        {
            let out = predict(&net, validation)?;
            Some(evaluate_records(validation, |i| out[i].theta.clone(), w)?)
        } else {
            None
        };
        metrics.push(NnEpochMetrics {
            epoch,
            loss: loss / batches as f64,
            attention_loss: att / batches as f64,
            evd: mean_or_nan(evd_sum, evd_n),
            validation,
        });
    }
    Ok(PolicyNetRun { net, metrics })
}

/// One temporal training example: the history ending at cycle `t` and the
/// record of cycle `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TanSample {
    pub history: Vec<HistorySlot>,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TanSamples {
    pub samples: Vec<TanSample>,
    /// Cycles whose successor record is missing.
    pub skipped: usize,
}

/// Builds temporal samples from sequential records and the frozen policy
/// network's outputs for them. A gap in cycle indices starts a new sequence.
pub fn tan_samples(
    records: &[CycleRecord],
    outputs: &[PolicyOutput],
    history: usize,
) -> Result<TanSamples> {
    if records.len() != outputs.len() {
        return Err(Error::dims(records.len(), outputs.len()));
    }
    let mut out = TanSamples::default();
    let mut seq: Vec<HistorySlot> = Vec::new();
    for i in 0..records.len() {
        if i > 0 && records[i].cycle != records[i - 1].cycle + 1 {
            seq.clear();
        }
        seq.push(HistorySlot {
            context: outputs[i].context.clone(),
            theta: outputs[i].theta.clone(),
        });
        match records.get(i + 1) {
            Some(next) if next.cycle == records[i].cycle + 1 => out.samples.push(TanSample {
                history: bootstrap_history(&seq, history)?,
                target: i + 1,
            }),
            _ => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Gradient of `-ln p(pi^D)` at the mixture weights on the target record.
pub fn tan_gradient(tan: &Tan, sample: &TanSample, target: &CycleRecord) -> Result<RecordGradient> {
    let t = tan.trace(&sample.history)?;
    let theta = t.graph.value(t.theta).data.clone();
    let ll = log_likelihood(&target.set, target.demo.index, &theta)?;
    let value_difference = evd(&target.set, target.demo.index, &theta)?;
    let seed = negate(maxent_gradient(&target.set, target.demo.index, &theta)?);
    let grads = t.graph.backward(&[(t.theta, &seed)])?;
    Ok(RecordGradient {
        gradient: tan.params.gradient(&t.params, &grads),
        log_likelihood: ll,
        attention_loss: 0.0,
        evd: value_difference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TanRun {
    pub tan: Tan,
    pub metrics: Vec<NnEpochMetrics>,
    pub skipped: usize,
}

/// Trains the temporal attention network on next-cycle likelihood, with the
/// policy network frozen.
pub fn train_tan(
    records: &[CycleRecord],
    pacnn: &PolicyNet,
    config: &TanConfig,
    seed: u64,
) -> Result<TanRun> {
    let outputs = predict(pacnn, records)?;
    let TanSamples { samples, skipped } = tan_samples(records, &outputs, config.dims.history)?;
    if samples.is_empty() {
        return Err(Error::Empty("temporal training samples"));
    }
    let dims = TanDims {
        context: pacnn.dims.context,
        ..config.dims
    };
    let mut tan = Tan::new(dims, seed)?;
    let mut flat = tan.params.flat();
    let mut opt = OptimizerState::new(config.optimizer, config.step, flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a17);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut batches) = (0.0, 0usize);
        let (mut evd_sum, mut evd_n) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let parts = map_records(chunk.len(), |j| {
                let s = &samples[chunk[j]];
                tan_gradient(&tan, s, &records[s.target])
            })?;
            tally_evd(&parts, &mut evd_sum, &mut evd_n);
            let (g, ll, _) = mean_gradient(parts, flat.len());
            if !ll.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            opt.apply(&mut flat, &g);
            tan.params.set_flat(&flat)?;
            loss -= ll;
            batches += 1;
        }
        metrics.push(NnEpochMetrics {
            epoch,
            loss: loss / batches as f64,
            attention_loss: 0.0,
            evd: mean_or_nan(evd_sum, evd_n),
            validation: None,
        });
    }
    Ok(TanRun {
        tan,
        metrics,
        skipped,
    })
}

/// Saves parameters to the versioned container.
pub fn save_params(params: &Params, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, params.to_bytes())?;
    Ok(())
}

pub fn load_params(path: &std::path::Path) -> Result<Params> {
    Params::from_bytes(&std::fs::read(path)?)
}
