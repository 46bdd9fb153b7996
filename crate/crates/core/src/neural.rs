//! Dense ReLU network with a linear head, exact backprop and Adam.
//!
//! Parameters live in one flat buffer in canonical order: layer by layer,
//! each layer's weight matrix (row-major, `out × in`) followed by its bias.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// `[input, hidden…, output]`.
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Self {
        Self { layer_sizes, seed }
    }

    /// `input → 64 → 64 → output`.
    pub fn two_hidden(input: usize, output: usize, seed: u64) -> Self {
        Self::new(vec![input, 64, 64, output], seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig("an MLP needs at least input and output layers".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    spec: MlpSpec,
    shapes: Vec<LayerShape>,
    flat: Vec<f64>,
}

/// Post-activation values of every layer, input first.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least the input")
    }
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut shapes = Vec::new();
        let mut off = 0;
        for w in spec.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            shapes.push(LayerShape { n_in, n_out, w_off: off, b_off: off + n_in * n_out });
            off += n_in * n_out + n_out;
        }
        Ok(Self { spec: spec.clone(), shapes, flat: vec![0.0; off] })
    }

    /// He-uniform weights `U(±√(6/fan_in))`, zero biases, seeded by `spec.seed`.
    pub fn init(spec: &MlpSpec) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for s in p.shapes.clone() {
            let limit = (6.0 / s.n_in as f64).sqrt();
            for w in &mut p.flat[s.w_off..s.b_off] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(p)
    }

    pub fn from_flat(spec: &MlpSpec, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        if flat.len() != p.flat.len() {
            return Err(Error::DimensionMismatch { expected: p.flat.len(), actual: flat.len() });
        }
        p.flat.copy_from_slice(flat);
        Ok(p)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn n_params(&self) -> usize {
        self.flat.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.layer_sizes.last().unwrap()
    }

    /// Mutable weight matrix (row-major `out × in`) and bias of `layer`.
    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let s = self.shapes[layer];
        let (w, b) = self.flat[s.w_off..s.b_off + s.n_out].split_at_mut(s.n_in * s.n_out);
        (w, b)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for (k, s) in self.shapes.iter().enumerate() {
            x = self.affine(s, &x, k + 1 < self.shapes.len());
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.shapes.len() + 1);
        activations.push(input.to_vec());
        for (k, s) in self.shapes.iter().enumerate() {
            let next = self.affine(s, activations.last().unwrap(), k + 1 < self.shapes.len());
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    fn affine(&self, s: &LayerShape, x: &[f64], relu: bool) -> Vec<f64> {
        let w = &self.flat[s.w_off..s.b_off];
        let b = &self.flat[s.b_off..s.b_off + s.n_out];
        w.chunks_exact(s.n_in)
            .zip(b)
            .map(|(row, &bias)| {
                let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias;
                if relu { z.max(0.0) } else { z }
            })
            .collect()
    }

    /// Gradient of `⟨output_grad, forward(input)⟩` with respect to the flat
    /// parameters.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(input)?;
        let mut grad = vec![0.0; self.flat.len()];
        self.accumulate_gradient(&trace, output_grad, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale ·` (gradient for `output_grad` at `trace`) into `grad`.
    pub fn accumulate_gradient(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), actual: output_grad.len() });
        }
        if grad.len() != self.flat.len() {
            return Err(Error::DimensionMismatch { expected: self.flat.len(), actual: grad.len() });
        }
        let mut delta: Vec<f64> = output_grad.iter().map(|g| g * scale).collect();
        for (k, s) in self.shapes.iter().enumerate().rev() {
            let x = &trace.activations[k];
            let (gw, gb) = grad[s.w_off..s.b_off + s.n_out].split_at_mut(s.n_in * s.n_out);
            for ((row, gbias), &d) in gw.chunks_exact_mut(s.n_in).zip(gb.iter_mut()).zip(&delta) {
                *gbias += d;
                if d != 0.0 {
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.flat[s.w_off..s.b_off];
            let mut prev = vec![0.0; s.n_in];
            for (row, &d) in w.chunks_exact(s.n_in).zip(&delta) {
                if d != 0.0 {
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += d * wi;
                    }
                }
            }
            // ReLU derivative from the post-activation value
            for (p, &a) in prev.iter_mut().zip(x) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: input.len() });
        }
        Ok(())
    }

    /// Writes `[u64 LE header length][JSON header][f64 LE parameters]`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&CheckpointHeader {
            layer_sizes: self.spec.layer_sizes.clone(),
            seed: self.spec.seed,
            n_params: self.flat.len(),
        })?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        for v in &self.flat {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let corrupt = || Error::InvalidConfig(format!("corrupt checkpoint {}", path.display()));
        let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(corrupt)?.try_into().unwrap();
        let hlen = u64::from_le_bytes(len_bytes) as usize;
        let header: CheckpointHeader = serde_json::from_slice(bytes.get(8..8 + hlen).ok_or_else(corrupt)?)?;
        let body = &bytes[8 + hlen..];
        if body.len() != header.n_params * 8 {
            return Err(corrupt());
        }
        let flat: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_flat(&MlpSpec::new(header.layer_sizes, header.seed), &flat)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    layer_sizes: Vec<usize>,
    seed: u64,
    n_params: usize,
}

/// Copies `online` into `target`; both must share a layer layout.
pub fn hard_update(target: &mut MlpParams, online: &MlpParams) -> Result<()> {
    if target.spec.layer_sizes != online.spec.layer_sizes {
        return Err(Error::InvalidConfig("hard update between different architectures".into()));
    }
    target.flat.copy_from_slice(&online.flat);
    Ok(())
}

/// Rescales `grad` in place to at most `max_norm`; returns the original norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// `θ ← θ − η m̂ / (√v̂ + ε)`; refuses non-finite gradients untouched.
    pub fn step_slice(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch { expected: self.m.len(), actual: grad.len().min(params.len()) });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut MlpParams, grad: &[f64]) -> Result<()> {
        self.step_slice(params.flat_mut(), grad)
    }
}
