//! Reverse-mode automatic differentiation over a tape of coarse operations.

use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::dims(&shape, data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Handle of a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    Softplus,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative from the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
    },
    AvgPool {
        x: Var,
        k: usize,
    },
    MeanLast {
        x: Var,
    },
    Act {
        x: Var,
        kind: Activation,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    ScaleBy {
        x: Var,
        s: Var,
    },
    Concat {
        parts: Vec<Var>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    Reshape {
        x: Var,
    },
    MaskedSoftmax {
        x: Var,
        mask: Vec<bool>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    MaskedMeanRows {
        x: Var,
        mask: Vec<bool>,
    },
    SumAll {
        x: Var,
    },
    MaskRows {
        x: Var,
        mask: Vec<bool>,
    },
    Transpose {
        x: Var,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of every tape node after a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients(Vec<Option<Vec<f64>>>);

impl Gradients {
    /// Gradient of `v`, zero-filled when no path reaches it.
    pub fn get(&self, v: Var, len: usize) -> Vec<f64> {
        self.0[v.0].clone().unwrap_or_else(|| vec![0.0; len])
    }
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension {
        expected: format!("{op}: {a:?}"),
        got: format!("{b:?}"),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    /// `x [n, i] * w[o, i]^T + b[o]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(Error::Dimension {
                expected: format!("linear: x {xs:?} against w {ws:?}"),
                got: format!("b {bs:?}"),
            });
        }
        let (n, i, o) = (xs[0], xs[1], ws[0]);
        let (xv, wv, bv) = (
            &self.value(x).data,
            &self.value(w).data,
            &self.value(b).data,
        );
        let mut out = vec![0.0; n * o];
        for r in 0..n {
            let xr = &xv[r * i..(r + 1) * i];
            for c in 0..o {
                let wr = &wv[c * i..(c + 1) * i];
                out[r * o + c] = bv[c] + xr.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![n, o],
                data: out,
            },
            Op::Linear { x, w, b },
        ))
    }

    /// Valid 1-D convolution: `x [n, ci, l]`, `w [co, ci, k]`, `b [co]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let (xs, ws, bs) = (
            self.shape(x).to_vec(),
            self.shape(w).to_vec(),
            self.shape(b).to_vec(),
        );
        if xs.len() != 3
            || ws.len() != 3
            || xs[1] != ws[1]
            || bs != [ws[0]]
            || xs[2] < ws[2]
            || stride == 0
        {
            return Err(shape_err("conv1d", &xs, &ws));
        }
        let (n, ci, l) = (xs[0], xs[1], xs[2]);
        let (co, k) = (ws[0], ws[2]);
        let lo = (l - k) / stride + 1;
        let (xv, wv, bv) = (
            &self.value(x).data,
            &self.value(w).data,
            &self.value(b).data,
        );
        let mut out = vec![0.0; n * co * lo];
        for s in 0..n {
            for o in 0..co {
                for p in 0..lo {
                    let mut acc = bv[o];
                    for c in 0..ci {
                        let xrow = &xv[(s * ci + c) * l + p * stride..];
                        let wrow = &wv[(o * ci + c) * k..(o * ci + c + 1) * k];
                        for (j, wj) in wrow.iter().enumerate() {
                            acc += wj * xrow[j];
                        }
                    }
                    out[(s * co + o) * lo + p] = acc;
                }
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![n, co, lo],
                data: out,
            },
            Op::Conv1d { x, w, b, stride },
        ))
    }

    /// Non-overlapping average pooling over the last axis of `x [n, c, l]`.
    pub fn avgpool1d(&mut self, x: Var, k: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || k == 0 || xs[2] < k {
            return Err(shape_err("avgpool1d", &xs, &[k]));
        }
        let (n, c, l) = (xs[0], xs[1], xs[2]);
        let lo = l / k;
        let xv = &self.value(x).data;
        let mut out = vec![0.0; n * c * lo];
        for r in 0..n * c {
            for p in 0..lo {
                out[r * lo + p] =
                    xv[r * l + p * k..r * l + (p + 1) * k].iter().sum::<f64>() / k as f64;
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![n, c, lo],
                data: out,
            },
            Op::AvgPool { x, k },
        ))
    }

    /// Mean over the last axis: `[n, c, l] -> [n, c]`.
    pub fn mean_last(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || xs[2] == 0 {
            return Err(shape_err("mean_last", &xs, &[]));
        }
        let (n, c, l) = (xs[0], xs[1], xs[2]);
        let xv = &self.value(x).data;
        let out = (0..n * c)
            .map(|r| xv[r * l..(r + 1) * l].iter().sum::<f64>() / l as f64)
            .collect();
        Ok(self.push(
            Tensor {
                shape: vec![n, c],
                data: out,
            },
            Op::MeanLast { x },
        ))
    }

    pub fn act(&mut self, x: Var, kind: Activation) -> Var {
        let v = self.value(x);
        let out = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| kind.apply(a)).collect(),
        };
        self.push(out, Op::Act { x, kind })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.act(x, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.act(x, Activation::Sigmoid)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.act(x, Activation::Softplus)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let out = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect(),
        };
        Ok(self.push(out, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let out = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect(),
        };
        Ok(self.push(out, Op::Mul { a, b }))
    }

    /// Multiplies every element of `x` by the single-element tensor `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(shape_err("scale_by", &[1], self.shape(s)));
        }
        let k = self.value(s).data[0];
        let v = self.value(x);
        let out = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|a| a * k).collect(),
        };
        Ok(self.push(out, Op::ScaleBy { x, s }))
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0])[0];
        let mut cols = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(shape_err("concat", self.shape(parts[0]), s));
            }
            cols.push(s[1]);
        }
        let total: usize = cols.iter().sum();
        let mut out = vec![0.0; rows * total];
        let mut off = 0;
        for (&p, &c) in parts.iter().zip(&cols) {
            let v = &self.value(p).data;
            for r in 0..rows {
                out[r * total + off..r * total + off + c].copy_from_slice(&v[r * c..(r + 1) * c]);
            }
            off += c;
        }
        Ok(self.push(
            Tensor {
                shape: vec![rows, total],
                data: out,
            },
            Op::Concat {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Columns `start..start+len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || start + len > s[1] {
            return Err(shape_err("slice_cols", &s, &[start, len]));
        }
        let (rows, cols) = (s[0], s[1]);
        let v = &self.value(x).data;
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&v[r * cols + start..r * cols + start + len]);
        }
        Ok(self.push(
            Tensor {
                shape: vec![rows, len],
                data: out,
            },
            Op::SliceCols { x, start },
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.len() {
            return Err(shape_err("reshape", &v.shape, &shape));
        }
        let out = Tensor {
            shape,
            data: v.data.clone(),
        };
        Ok(self.push(out, Op::Reshape { x }))
    }

    /// Softmax of a vector; masked-out entries get probability 0.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let v = self.value(x);
        if v.shape.len() != 1 || v.len() != mask.len() || !mask.iter().any(|m| *m) {
            return Err(shape_err("masked_softmax", &v.shape, &[mask.len()]));
        }
        let m = v
            .data
            .iter()
            .zip(mask)
            .filter(|(_, k)| **k)
            .map(|(a, _)| *a)
            .fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v
            .data
            .iter()
            .zip(mask)
            .map(|(a, k)| if *k { (a - m).exp() } else { 0.0 })
            .collect();
        let z: f64 = e.iter().sum();
        let out = Tensor {
            shape: v.shape.clone(),
            data: e.iter().map(|a| a / z).collect(),
        };
        Ok(self.push(
            out,
            Op::MaskedSoftmax {
                x,
                mask: mask.to_vec(),
            },
        ))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let mask = vec![true; self.value(x).len()];
        self.masked_softmax(x, &mask)
    }

    /// `a [m, k] x b [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (as_, bs) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if as_.len() != 2 || bs.len() != 2 || as_[1] != bs[0] {
            return Err(shape_err("matmul", &as_, &bs));
        }
        let (m, k, n) = (as_[0], as_[1], bs[1]);
        let (av, bv) = (&self.value(a).data, &self.value(b).data);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += x * bv[p * n + j];
                }
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![m, n],
                data: out,
            },
            Op::MatMul { a, b },
        ))
    }

    /// Mean of the selected rows of `x [n, d]`, as a `[d]` vector.
    pub fn masked_mean_rows(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let count = mask.iter().filter(|m| **m).count();
        if s.len() != 2 || s[0] != mask.len() || count == 0 {
            return Err(shape_err("masked_mean_rows", &s, &[mask.len()]));
        }
        let (n, d) = (s[0], s[1]);
        let v = &self.value(x).data;
        let mut out = vec![0.0; d];
        for r in (0..n).filter(|&r| mask[r]) {
            for c in 0..d {
                out[c] += v[r * d + c];
            }
        }
        out.iter_mut().for_each(|a| *a /= count as f64);
        Ok(self.push(
            Tensor {
                shape: vec![d],
                data: out,
            },
            Op::MaskedMeanRows {
                x,
                mask: mask.to_vec(),
            },
        ))
    }

    /// Zeroes the rows of `x [n, ...]` whose mask entry is false.
    pub fn mask_rows(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let v = self.value(x);
        if v.shape.is_empty() || v.shape[0] != mask.len() {
            return Err(shape_err("mask_rows", &v.shape, &[mask.len()]));
        }
        let row = v.len() / mask.len();
        let data = v
            .data
            .iter()
            .enumerate()
            .map(|(i, a)| if mask[i / row] { *a } else { 0.0 })
            .collect();
        let out = Tensor {
            shape: v.shape.clone(),
            data,
        };
        Ok(self.push(
            out,
            Op::MaskRows {
                x,
                mask: mask.to_vec(),
            },
        ))
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(shape_err("transpose", &s, &[]));
        }
        let (r, c) = (s[0], s[1]);
        let v = &self.value(x).data;
        let data = (0..r * c).map(|i| v[(i % r) * c + i / r]).collect();
        Ok(self.push(
            Tensor {
                shape: vec![c, r],
                data,
            },
            Op::Transpose { x },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll { x })
    }

    /// Backpropagates the given output seeds through the tape.
    pub fn backward(&self, seeds: &[(Var, &[f64])]) -> Result<Gradients> {
        let mut g: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for (v, s) in seeds {
            if s.len() != self.value(*v).len() {
                return Err(shape_err(
                    "backward seed",
                    &self.value(*v).shape,
                    &[s.len()],
                ));
            }
            accumulate(&mut g, *v, s);
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(gy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            self.backward_node(node, &gy, &mut g);
            g[i] = Some(gy);
        }
        Ok(Gradients(g))
    }

    fn backward_node(&self, node: &Node, gy: &[f64], g: &mut [Option<Vec<f64>>]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xs, ws) = (self.shape(*x), self.shape(*w));
                let (n, i, o) = (xs[0], xs[1], ws[0]);
                let (xv, wv) = (&self.value(*x).data, &self.value(*w).data);
                let mut gx = vec![0.0; n * i];
                let mut gw = vec![0.0; o * i];
                let mut gb = vec![0.0; o];
                for r in 0..n {
                    for c in 0..o {
                        let d = gy[r * o + c];
                        if d == 0.0 {
                            continue;
                        }
                        gb[c] += d;
                        for j in 0..i {
                            gx[r * i + j] += d * wv[c * i + j];
                            gw[c * i + j] += d * xv[r * i + j];
                        }
                    }
                }
                accumulate(g, *x, &gx);
                accumulate(g, *w, &gw);
                accumulate(g, *b, &gb);
            }
            Op::Conv1d { x, w, b, stride } => {
                let (xs, ws) = (self.shape(*x), self.shape(*w));
                let (n, ci, l) = (xs[0], xs[1], xs[2]);
                let (co, k) = (ws[0], ws[2]);
                let lo = y.shape[2];
                let (xv, wv) = (&self.value(*x).data, &self.value(*w).data);
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                let mut gb = vec![0.0; co];
                for s in 0..n {
                    for o in 0..co {
                        for p in 0..lo {
                            let d = gy[(s * co + o) * lo + p];
                            if d == 0.0 {
                                continue;
                            }
                            gb[o] += d;
                            for c in 0..ci {
                                let xb = (s * ci + c) * l + p * stride;
                                let wb = (o * ci + c) * k;
                                for j in 0..k {
                                    gx[xb + j] += d * wv[wb + j];
                                    gw[wb + j] += d * xv[xb + j];
                                }
                            }
                        }
                    }
                }
                accumulate(g, *x, &gx);
                accumulate(g, *w, &gw);
                accumulate(g, *b, &gb);
            }
            Op::AvgPool { x, k } => {
                let xs = self.shape(*x);
                let (rows, l) = (xs[0] * xs[1], xs[2]);
                let lo = y.shape[2];
                let mut gx = vec![0.0; rows * l];
                for r in 0..rows {
                    for p in 0..lo {
                        let d = gy[r * lo + p] / *k as f64;
                        gx[r * l + p * k..r * l + (p + 1) * k]
                            .iter_mut()
                            .for_each(|a| *a += d);
                    }
                }
                accumulate(g, *x, &gx);
            }
            Op::MeanLast { x } => {
                let xs = self.shape(*x);
                let l = xs[2];
                let gx: Vec<f64> = (0..xs[0] * xs[1] * l)
                    .map(|i| gy[i / l] / l as f64)
                    .collect();
                accumulate(g, *x, &gx);
            }
            Op::Act { x, kind } => {
                let xv = &self.value(*x).data;
                let gx: Vec<f64> = xv
                    .iter()
                    .zip(&y.data)
                    .zip(gy)
                    .map(|((a, b), d)| d * kind.derivative(*a, *b))
                    .collect();
                accumulate(g, *x, &gx);
            }
            Op::Add { a, b } => {
                accumulate(g, *a, gy);
                accumulate(g, *b, gy);
            }
            Op::Mul { a, b } => {
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                let ga: Vec<f64> = gy.iter().zip(bv).map(|(d, x)| d * x).collect();
                let gb: Vec<f64> = gy.iter().zip(av).map(|(d, x)| d * x).collect();
                accumulate(g, *a, &ga);
                accumulate(g, *b, &gb);
            }
            Op::ScaleBy { x, s } => {
                let k = self.value(*s).data[0];
                let xv = &self.value(*x).data;
                let gx: Vec<f64> = gy.iter().map(|d| d * k).collect();
                let gs: f64 = gy.iter().zip(xv).map(|(d, a)| d * a).sum();
                accumulate(g, *x, &gx);
                accumulate(g, *s, &[gs]);
            }
            Op::Concat { parts } => {
                let rows = y.shape[0];
                let total = y.shape[1];
                let mut off = 0;
                for p in parts {
                    let c = self.shape(*p)[1];
                    let mut gp = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        gp.extend_from_slice(&gy[r * total + off..r * total + off + c]);
                    }
                    accumulate(g, *p, &gp);
                    off += c;
                }
            }
            Op::SliceCols { x, start } => {
                let xs = self.shape(*x);
                let (rows, cols) = (xs[0], xs[1]);
                let len = y.shape[1];
                let mut gx = vec![0.0; rows * cols];
                for r in 0..rows {
                    gx[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&gy[r * len..(r + 1) * len]);
                }
                accumulate(g, *x, &gx);
            }
            Op::Reshape { x } => accumulate(g, *x, gy),
            Op::MaskedSoftmax { x, mask } => {
                let dot: f64 = y.data.iter().zip(gy).map(|(p, d)| p * d).sum();
                let gx: Vec<f64> = y
                    .data
                    .iter()
                    .zip(gy)
                    .zip(mask)
                    .map(|((p, d), m)| if *m { p * (d - dot) } else { 0.0 })
                    .collect();
                accumulate(g, *x, &gx);
            }
            Op::MatMul { a, b } => {
                let (as_, bs) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (as_[0], as_[1], bs[1]);
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                let mut ga = vec![0.0; m * k];
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    for j in 0..n {
                        let d = gy[i * n + j];
                        if d == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            ga[i * k + p] += d * bv[p * n + j];
                            gb[p * n + j] += d * av[i * k + p];
                        }
                    }
                }
                accumulate(g, *a, &ga);
                accumulate(g, *b, &gb);
            }
            Op::MaskedMeanRows { x, mask } => {
                let d = y.shape[0];
                let count = mask.iter().filter(|m| **m).count() as f64;
                let gx: Vec<f64> = (0..mask.len() * d)
                    .map(|i| if mask[i / d] { gy[i % d] / count } else { 0.0 })
                    .collect();
                accumulate(g, *x, &gx);
            }
            Op::MaskRows { x, mask } => {
                let row = y.len() / mask.len();
                let gx: Vec<f64> = gy
                    .iter()
                    .enumerate()
                    .map(|(i, d)| if mask[i / row] { *d } else { 0.0 })
                    .collect();
                accumulate(g, *x, &gx);
            }
            Op::Transpose { x } => {
                let (r, c) = (y.shape[1], y.shape[0]);
                let gx: Vec<f64> = (0..r * c).map(|i| gy[(i % c) * r + i / c]).collect();
                accumulate(g, *x, &gx);
            }
            Op::SumAll { x } => {
                let n = self.value(*x).len();
                accumulate(g, *x, &vec![gy[0]; n]);
            }
        }
    }
}

fn accumulate(g: &mut [Option<Vec<f64>>], v: Var, d: &[f64]) {
    match &mut g[v.0] {
        Some(acc) => acc.iter_mut().zip(d).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(d.to_vec()),
    }
}
