//! Named parameter tensors and their versioned binary container.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Gradients, Graph, Tensor, Var};
use crate::datasets::Reader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PIRLNN\x00\x01";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn push(&mut self, name: &str, t: Tensor) -> usize {
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index(name).map(move |i| &mut self.tensors[i])
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count() {
            return Err(Error::dims(self.count(), flat.len()));
        }
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Places every tensor on the graph as a leaf, in order.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.leaf(t.clone())).collect()
    }

    /// Flattened gradient of the bound leaves.
    pub fn gradient(&self, vars: &[Var], grads: &Gradients) -> Vec<f64> {
        vars.iter()
            .zip(&self.tensors)
            .flat_map(|(v, t)| grads.get(*v, t.len()))
            .collect()
    }

    /// Versioned container: magic, tensor count, then per tensor the name,
    /// rank, dimensions and row-major values (little-endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for (name, t) in self.names.iter().zip(&self.tensors) {
            out.extend_from_slice(&(name.len() as u64).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u64).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |r: &str| Error::format("parameter container", r.to_string());
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut r = Reader::named(&bytes[8..], "parameter container");
        let n = r.u64()? as usize;
        let mut p = Params::default();
        for _ in 0..n {
            let len = r.u64()? as usize;
            let name =
                String::from_utf8(r.take(len)?.to_vec()).map_err(|_| bad("non-utf8 name"))?;
            let rank = r.u64()? as usize;
            let shape = (0..rank)
                .map(|_| Ok(r.u64()? as usize))
                .collect::<Result<Vec<_>>>()?;
            let count: usize = shape.iter().product();
            let data = (0..count)
                .map(|_| Ok(f64::from_bits(r.u64()?)))
                .collect::<Result<Vec<_>>>()?;
            p.push(&name, Tensor { shape, data });
        }
        r.finished()?;
        Ok(p)
    }
}

/// Seeded initialiser.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Glorot-uniform tensor.
    pub fn glorot(&mut self, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        Tensor {
            shape,
            data: (0..n)
                .map(|_| self.rng.random_range(-limit..limit))
                .collect(),
        }
    }

    pub fn uniform(&mut self, shape: Vec<usize>, limit: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: (0..n)
                .map(|_| self.rng.random_range(-limit..limit))
                .collect(),
        }
    }
}
