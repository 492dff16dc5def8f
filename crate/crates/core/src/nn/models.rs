//! Policy-attention network, the two convolutional baselines and the temporal
//! attention network.

use serde::{Deserialize, Serialize};

use super::graph::{Graph, Tensor, Var};
use super::params::{Init, Params};
use crate::error::{Error, Result};
use crate::planner::{PolicySet, K};

/// Input normalisation divisors.
pub const LATERAL_SCALE: f64 = 3.5;
pub const YAW_SCALE: f64 = 0.5;
pub const PROGRESS_SCALE: f64 = 100.0;
pub const FEATURE_SCALE: f64 = 6.0;
pub const ACCEL_SCALE: f64 = 5.0;
pub const CURVATURE_RATE_SCALE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Pacnn,
    #[serde(rename = "1dcnn")]
    Cnn1d,
    #[serde(rename = "bi1dcnn")]
    BiCnn1d,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Pacnn => "pacnn",
            Architecture::Cnn1d => "1dcnn",
            Architecture::BiCnn1d => "bi1dcnn",
        }
    }
}

/// Layer sizes shared by the policy networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetDims {
    /// Policy slots per input (pad or subsample to this count).
    pub policies: usize,
    pub control_points: usize,
    /// Actions per policy; each contributes acceleration and curvature rate.
    pub actions: usize,
    pub kernel: usize,
    pub encoder_channels: [usize; 2],
    /// Latent and context width.
    pub context: usize,
    pub attention_channels: usize,
    pub attention_pool: usize,
    pub attention_hidden: usize,
    pub head_hidden: usize,
    /// Channels of the baseline convolutions over the policy axis.
    pub policy_conv_channels: usize,
}

impl Default for NetDims {
    fn default() -> Self {
        Self {
            policies: 64,
            control_points: 13,
            actions: 4,
            kernel: 3,
            encoder_channels: [8, 16],
            context: 32,
            attention_channels: 4,
            attention_pool: 2,
            attention_hidden: 16,
            head_hidden: 32,
            policy_conv_channels: 16,
        }
    }
}

impl NetDims {
    pub fn extras(&self) -> usize {
        K + 2 * self.actions
    }

    fn conv_len(l: usize, k: usize, stride: usize) -> Option<usize> {
        (l >= k && k > 0 && stride > 0).then(|| (l - k) / stride + 1)
    }

    fn attention_len(&self) -> Option<usize> {
        let l = Self::conv_len(self.control_points, self.kernel, 1)?;
        (self.attention_pool > 0 && l >= self.attention_pool).then(|| l / self.attention_pool)
    }

    fn policy_conv_len(&self) -> Option<usize> {
        let l = Self::conv_len(self.policies, 3, 2)?;
        Self::conv_len(l, 3, 2)
    }

    pub fn validate(&self, arch: Architecture) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("network dimensions", reason));
        if self.policies == 0 || self.context == 0 {
            return bad("policy slots and context width must be positive");
        }
        let l1 = Self::conv_len(self.control_points, self.kernel, 1);
        if l1.and_then(|l| Self::conv_len(l, self.kernel, 1)).is_none() {
            return bad("control points too few for two encoder convolutions");
        }
        if arch == Architecture::Pacnn && self.attention_len().is_none() {
            return bad("control points too few for the attention encoder");
        }
        if arch == Architecture::BiCnn1d && self.policy_conv_len().is_none() {
            return bad("policy slots too few for two stride-2 convolutions");
        }
        Ok(())
    }
}

/// Network input for one planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyInput {
    /// `[N, 3, M]`: lateral offset, yaw and progress per control point.
    pub control_points: Tensor,
    /// `[N, K + 2D]`: features followed by action parameters.
    pub extras: Tensor,
    pub mask: Vec<bool>,
    /// Source policy index of every slot; `None` for padding.
    pub slots: Vec<Option<usize>>,
}

/// Slot sources for `n` policies in `slots` slots: uniform-stride subsampling
/// when too many, trailing padding when too few.
pub fn slot_sources(n: usize, slots: usize) -> Vec<Option<usize>> {
    if n > slots {
        (0..slots).map(|i| Some(i * n / slots)).collect()
    } else {
        (0..slots).map(|i| (i < n).then_some(i)).collect()
    }
}

impl PolicyInput {
    /// Encodes a policy set, ordering policies ascending by progress first.
    pub fn from_set(set: &PolicySet, dims: &NetDims) -> Result<Self> {
        let mut order: Vec<usize> = (0..set.len()).collect();
        if !set.sorted {
            order.sort_by(|&a, &b| {
                let (pa, pb) = (
                    set.policies[a].final_progress(),
                    set.policies[b].final_progress(),
                );
                pa.total_cmp(&pb).then(a.cmp(&b))
            });
        }
        Self::from_order(set, &order, dims)
    }

    /// Encodes the policies of `set` in the given order, without sorting.
    pub fn from_order(set: &PolicySet, order: &[usize], dims: &NetDims) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::Empty("policy set"));
        }
        let (n, m, e) = (dims.policies, dims.control_points, dims.extras());
        let slots: Vec<Option<usize>> = slot_sources(order.len(), n)
            .into_iter()
            .map(|s| s.map(|i| order[i]))
            .collect();
        let mut cp = vec![0.0; n * 3 * m];
        let mut ex = vec![0.0; n * e];
        for (slot, src) in slots.iter().enumerate() {
            let Some(src) = *src else { continue };
            let p = set
                .policies
                .get(src)
                .ok_or_else(|| Error::invalid("policy order", "index out of range"))?;
            if p.control_points.len() != m {
                return Err(Error::dims(m, p.control_points.len()));
            }
            if p.features.len() != K {
                return Err(Error::dims(K, p.features.len()));
            }
            if p.actions.len() != dims.actions {
                return Err(Error::dims(dims.actions, p.actions.len()));
            }
            for (j, c) in p.control_points.iter().enumerate() {
                cp[(slot * 3) * m + j] = c.lateral / LATERAL_SCALE;
                cp[(slot * 3 + 1) * m + j] = c.yaw / YAW_SCALE;
                cp[(slot * 3 + 2) * m + j] = c.progress / PROGRESS_SCALE;
            }
            let row = &mut ex[slot * e..(slot + 1) * e];
            for (r, f) in row.iter_mut().zip(&p.features) {
                *r = f / FEATURE_SCALE;
            }
            for (j, a) in p.actions.iter().enumerate() {
                row[K + 2 * j] = a.accel / ACCEL_SCALE;
                row[K + 2 * j + 1] = a.curvature_rate / CURVATURE_RATE_SCALE;
            }
        }
        Ok(Self {
            control_points: Tensor {
                shape: vec![n, 3, m],
                data: cp,
            },
            extras: Tensor {
                shape: vec![n, e],
                data: ex,
            },
            mask: slots.iter().map(Option::is_some).collect(),
            slots,
        })
    }
}

/// Forward-pass outputs of a policy network.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub theta: Vec<f64>,
    pub context: Vec<f64>,
    /// Attention over input slots; only the attention architecture has one.
    pub attention: Option<Vec<f64>>,
}

/// A forward pass recorded on a tape, ready for backpropagation.
pub struct Traced {
    pub graph: Graph,
    pub params: Vec<Var>,
    pub theta: Var,
    pub context: Var,
    pub attention: Option<Var>,
}

/// A policy network: architecture, dimensions and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub arch: Architecture,
    pub dims: NetDims,
    pub params: Params,
}

struct Layers<'a> {
    p: &'a Params,
    vars: &'a [Var],
}

impl Layers<'_> {
    fn var(&self, name: &str) -> Result<Var> {
        self.p
            .index(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::format("parameters", format!("missing {name}")))
    }

    fn linear(&self, g: &mut Graph, x: Var, name: &str) -> Result<Var> {
        g.linear(
            x,
            self.var(&format!("{name}.w"))?,
            self.var(&format!("{name}.b"))?,
        )
    }

    fn conv(&self, g: &mut Graph, x: Var, name: &str, stride: usize) -> Result<Var> {
        g.conv1d(
            x,
            self.var(&format!("{name}.w"))?,
            self.var(&format!("{name}.b"))?,
            stride,
        )
    }
}

fn push_linear(p: &mut Params, init: &mut Init, name: &str, inp: usize, out: usize) {
    p.push(&format!("{name}.w"), init.glorot(vec![out, inp], inp, out));
    p.push(&format!("{name}.b"), Tensor::zeros(vec![out]));
}

fn push_conv(p: &mut Params, init: &mut Init, name: &str, cin: usize, cout: usize, k: usize) {
    p.push(
        &format!("{name}.w"),
        init.glorot(vec![cout, cin, k], cin * k, cout * k),
    );
    p.push(&format!("{name}.b"), Tensor::zeros(vec![cout]));
}

impl PolicyNet {
    /// Freshly initialised network.
    pub fn new(arch: Architecture, dims: NetDims, seed: u64) -> Result<Self> {
        dims.validate(arch)?;
        let mut init = Init::new(seed);
        let mut p = Params::default();
        let [c1, c2] = dims.encoder_channels;
        let (c, k) = (dims.context, dims.kernel);
        push_conv(&mut p, &mut init, "enc.conv1", 3, c1, k);
        push_conv(&mut p, &mut init, "enc.conv2", c1, c2, k);
        push_linear(&mut p, &mut init, "enc.fc", c2 + dims.extras(), c);
        match arch {
            Architecture::Pacnn => {
                let l = dims.attention_len().unwrap_or(0);
                push_conv(&mut p, &mut init, "att.conv", 3, dims.attention_channels, k);
                push_linear(
                    &mut p,
                    &mut init,
                    "att.fc1",
                    dims.attention_channels * l + dims.extras(),
                    dims.attention_hidden,
                );
                push_linear(&mut p, &mut init, "att.fc2", dims.attention_hidden, 1);
                p.push("att.gamma", Tensor::scalar(0.0));
            }
            Architecture::Cnn1d => push_linear(&mut p, &mut init, "ctx.fc", dims.policies * c, c),
            Architecture::BiCnn1d => {
                let q = dims.policy_conv_channels;
                push_conv(&mut p, &mut init, "ctx.conv1", c, q, 3);
                push_conv(&mut p, &mut init, "ctx.conv2", q, q, 3);
                push_linear(
                    &mut p,
                    &mut init,
                    "ctx.fc",
                    q * dims.policy_conv_len().unwrap_or(0),
                    c,
                );
            }
        }
        push_linear(&mut p, &mut init, "head.fc1", c, dims.head_hidden);
        push_linear(&mut p, &mut init, "head.fc2", dims.head_hidden, K);
        Ok(Self {
            arch,
            dims,
            params: p,
        })
    }

    /// Records the forward pass of `input` on a fresh tape.
    pub fn trace(&self, input: &PolicyInput) -> Result<Traced> {
        let d = &self.dims;
        if input.control_points.shape != [d.policies, 3, d.control_points]
            || input.extras.shape != [d.policies, d.extras()]
        {
            return Err(Error::dims(
                [d.policies, 3, d.control_points, d.extras()],
                [&input.control_points.shape[..], &input.extras.shape[..]].concat(),
            ));
        }
        if !input.mask.iter().any(|m| *m) {
            return Err(Error::Empty("policy input"));
        }
        let mut g = Graph::new();
        let vars = self.params.bind(&mut g);
        let l = Layers {
            p: &self.params,
            vars: &vars,
        };
        let cp = g.leaf(input.control_points.clone());
        let ex = g.leaf(input.extras.clone());
        let mask = &input.mask;

        let z = l.conv(&mut g, cp, "enc.conv1", 1)?;
        let z = g.tanh(z);
        let z = l.conv(&mut g, z, "enc.conv2", 1)?;
        let z = g.tanh(z);
        let z = g.mean_last(z)?;
        let z = g.concat(&[z, ex])?;
        let z = l.linear(&mut g, z, "enc.fc")?;
        let z = g.tanh(z);
        let h = g.mask_rows(z, mask)?;

        let (context, attention) = match self.arch {
            Architecture::Pacnn => {
                let a = l.conv(&mut g, cp, "att.conv", 1)?;
                let a = g.tanh(a);
                let a = g.avgpool1d(a, d.attention_pool)?;
                let width = g.shape(a)[1] * g.shape(a)[2];
                let a = g.reshape(a, vec![d.policies, width])?;
                let a = g.concat(&[a, ex])?;
                let a = l.linear(&mut g, a, "att.fc1")?;
                let a = g.tanh(a);
                let a = l.linear(&mut g, a, "att.fc2")?;
                let a = g.reshape(a, vec![d.policies])?;
                let alpha = g.masked_softmax(a, mask)?;
                let row = g.reshape(alpha, vec![1, d.policies])?;
                let attended = g.matmul(row, h)?;
                let attended = g.scale_by(attended, l.var("att.gamma")?)?;
                let mean = g.masked_mean_rows(h, mask)?;
                let mean = g.reshape(mean, vec![1, d.context])?;
                (g.add(attended, mean)?, Some(alpha))
            }
            Architecture::Cnn1d => {
                let flat = g.reshape(h, vec![1, d.policies * d.context])?;
                let c = l.linear(&mut g, flat, "ctx.fc")?;
                (g.tanh(c), None)
            }
            Architecture::BiCnn1d => {
                let t = g.transpose(h)?;
                let t = g.reshape(t, vec![1, d.context, d.policies])?;
                let t = l.conv(&mut g, t, "ctx.conv1", 2)?;
                let t = g.tanh(t);
                let t = l.conv(&mut g, t, "ctx.conv2", 2)?;
                let t = g.tanh(t);
                let width = g.value(t).len();
                let t = g.reshape(t, vec![1, width])?;
                let c = l.linear(&mut g, t, "ctx.fc")?;
                (g.tanh(c), None)
            }
        };

        let y = l.linear(&mut g, context, "head.fc1")?;
        let y = g.tanh(y);
        let y = l.linear(&mut g, y, "head.fc2")?;
        let theta = g.softplus(y);
        Ok(Traced {
            graph: g,
            params: vars,
            theta,
            context,
            attention,
        })
    }

    pub fn forward(&self, input: &PolicyInput) -> Result<PolicyOutput> {
        let t = self.trace(input)?;
        Ok(PolicyOutput {
            theta: t.graph.value(t.theta).data.clone(),
            context: t.graph.value(t.context).data.clone(),
            attention: t.attention.map(|a| t.graph.value(a).data.clone()),
        })
    }

    /// Encodes `set` and runs the forward pass.
    pub fn infer(&self, set: &PolicySet) -> Result<PolicyOutput> {
        self.forward(&PolicyInput::from_set(set, &self.dims)?)
    }
}

/// Attention loss `sum_i alpha_i * d_i` over input slots, with `distances`
/// the normalised distances of the source policies to the demonstration.
/// Padding slots carry no attention and contribute nothing.
pub fn attention_loss(
    attention: &[f64],
    slots: &[Option<usize>],
    distances: &[f64],
) -> Result<f64> {
    Ok(attention_slot_distances(slots, distances)?
        .iter()
        .zip(attention)
        .map(|(d, a)| a * d)
        .sum())
}

/// Per-slot distances; zero for padding.
pub fn attention_slot_distances(slots: &[Option<usize>], distances: &[f64]) -> Result<Vec<f64>> {
    slots
        .iter()
        .map(|s| match s {
            Some(i) => distances
                .get(*i)
                .copied()
                .ok_or_else(|| Error::invalid("slot", "index out of range")),
            None => Ok(0.0),
        })
        .collect()
}

/// Piecewise-constant average upsampling of a simplex vector to `len`
/// entries, renormalised to unit mass.
pub fn upsample_attention(attention: &[f64], len: usize) -> Result<Vec<f64>> {
    let n = attention.len();
    if n == 0 || len < n {
        return Err(Error::invalid(
            "upsample target",
            format!("{len} entries for an attention of {n}"),
        ));
    }
    let source = |j: usize| j * n / len;
    let mut counts = vec![0usize; n];
    (0..len).for_each(|j| counts[source(j)] += 1);
    let out: Vec<f64> = (0..len)
        .map(|j| attention[source(j)] / counts[source(j)] as f64)
        .collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        Ok(out.iter().map(|a| a / total).collect())
    } else {
        Ok(out)
    }
}

/// Sizes of the temporal attention network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TanDims {
    pub history: usize,
    pub context: usize,
    pub hidden: usize,
    pub fc_hidden: usize,
}

impl Default for TanDims {
    fn default() -> Self {
        Self {
            history: 10,
            context: 32,
            hidden: 32,
            fc_hidden: 32,
        }
    }
}

/// One history slot: a context vector and the reward weights predicted with it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistorySlot {
    pub context: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TanOutput {
    pub weights: Vec<f64>,
    pub theta: Vec<f64>,
}

pub struct TanTraced {
    pub graph: Graph,
    pub params: Vec<Var>,
    pub weights: Var,
    pub theta: Var,
}

/// Temporal attention network: two stacked LSTM layers over the history,
/// four fully-connected layers and a softmax over history slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Tan {
    pub dims: TanDims,
    pub params: Params,
}

const TAN_LAYERS: usize = 2;
const TAN_FC: usize = 4;

impl Tan {
    pub fn new(dims: TanDims, seed: u64) -> Result<Self> {
        if dims.history == 0 || dims.hidden == 0 || dims.fc_hidden == 0 {
            return Err(Error::invalid(
                "temporal network dimensions",
                "sizes must be positive",
            ));
        }
        let mut init = Init::new(seed);
        let mut p = Params::default();
        let hd = dims.hidden;
        for layer in 0..TAN_LAYERS {
            let inp = if layer == 0 { dims.context + K } else { hd };
            let name = format!("lstm{layer}");
            push_linear(&mut p, &mut init, &name, inp + hd, 4 * hd);
            if let Some(b) = p.get_mut(&format!("{name}.b")) {
                b.data[hd..2 * hd].iter_mut().for_each(|x| *x = 1.0);
            }
        }
        for i in 0..TAN_FC {
            let inp = if i == 0 { hd } else { dims.fc_hidden };
            let out = if i + 1 == TAN_FC {
                dims.history
            } else {
                dims.fc_hidden
            };
            push_linear(&mut p, &mut init, &format!("fc{i}"), inp, out);
        }
        Ok(Self { dims, params: p })
    }

    /// Records the forward pass over `history` (oldest first).
    pub fn trace(&self, history: &[HistorySlot]) -> Result<TanTraced> {
        let d = &self.dims;
        if history.len() != d.history {
            return Err(Error::dims(d.history, history.len()));
        }
        for h in history {
            if h.context.len() != d.context {
                return Err(Error::dims(d.context, h.context.len()));
            }
            if h.theta.len() != K {
                return Err(Error::dims(K, h.theta.len()));
            }
        }
        let mut g = Graph::new();
        let vars = self.params.bind(&mut g);
        let l = Layers {
            p: &self.params,
            vars: &vars,
        };
        let hd = d.hidden;
        let mut hs = [g.leaf(Tensor::zeros(vec![1, hd])); TAN_LAYERS];
        let mut cs = [g.leaf(Tensor::zeros(vec![1, hd])); TAN_LAYERS];
        for slot in history {
            let mut x = {
                let mut v = slot.context.clone();
                v.extend(slot.theta.iter().map(|t| t.max(0.0).ln_1p()));
                g.leaf(Tensor {
                    shape: vec![1, d.context + K],
                    data: v,
                })
            };
            for layer in 0..TAN_LAYERS {
                let z = g.concat(&[x, hs[layer]])?;
                let z = l.linear(&mut g, z, &format!("lstm{layer}"))?;
                let i = g.slice_cols(z, 0, hd)?;
                let f = g.slice_cols(z, hd, hd)?;
                let c = g.slice_cols(z, 2 * hd, hd)?;
                let o = g.slice_cols(z, 3 * hd, hd)?;
                let (i, f, c, o) = (g.sigmoid(i), g.sigmoid(f), g.tanh(c), g.sigmoid(o));
                let keep = g.mul(f, cs[layer])?;
                let write = g.mul(i, c)?;
                cs[layer] = g.add(keep, write)?;
                let tc = g.tanh(cs[layer]);
                hs[layer] = g.mul(o, tc)?;
                x = hs[layer];
            }
        }
        let mut y = hs[TAN_LAYERS - 1];
        for i in 0..TAN_FC {
            y = l.linear(&mut g, y, &format!("fc{i}"))?;
            if i + 1 < TAN_FC {
                y = g.tanh(y);
            }
        }
        let y = g.reshape(y, vec![d.history])?;
        let w = g.softmax(y)?;
        let row = g.reshape(w, vec![1, d.history])?;
        let thetas = g.leaf(Tensor {
            shape: vec![d.history, K],
            data: history
                .iter()
                .flat_map(|h| h.theta.iter().copied())
                .collect(),
        });
        let theta = g.matmul(row, thetas)?;
        Ok(TanTraced {
            graph: g,
            params: vars,
            weights: w,
            theta,
        })
    }

    pub fn forward(&self, history: &[HistorySlot]) -> Result<TanOutput> {
        let t = self.trace(history)?;
        Ok(TanOutput {
            weights: t.graph.value(t.weights).data.clone(),
            theta: t.graph.value(t.theta).data.clone(),
        })
    }
}

/// Mixture `sum_h w_h theta_h`.
pub fn mix_thetas(weights: &[f64], thetas: &[Vec<f64>]) -> Result<Vec<f64>> {
    if weights.len() != thetas.len() {
        return Err(Error::dims(thetas.len(), weights.len()));
    }
    let k = thetas.first().map_or(0, Vec::len);
    let mut out = vec![0.0; k];
    for (w, t) in weights.iter().zip(thetas) {
        if t.len() != k {
            return Err(Error::dims(k, t.len()));
        }
        out.iter_mut().zip(t).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

/// Exactly `len` slots ending with the newest entry of `recent`, repeating
/// the oldest available entry when fewer exist.
pub fn bootstrap_history<T: Clone>(recent: &[T], len: usize) -> Result<Vec<T>> {
    let first = recent.first().ok_or(Error::Empty("history"))?;
    let tail = &recent[recent.len().saturating_sub(len)..];
    let mut out = vec![first.clone(); len - tail.len()];
    out.extend_from_slice(tail);
    Ok(out)
}
