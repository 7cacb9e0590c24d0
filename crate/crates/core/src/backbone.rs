//! Fully connected ELU feature extractor.
//!
//! Hidden layers are `affine -> ELU`; the output layer is affine only. In
//! CLM mode the output is the single latent projection `l(x)`, in nominal mode
//! it is a vector of `Q` logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_HIDDEN_LAYERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl BackboneSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = BackboneSpec { input_dim, hidden, output_dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("backbone dimensions must be at least 1".into()));
        }
        if self.hidden.len() > MAX_HIDDEN_LAYERS {
            return Err(Error::Config(format!(
                "{} hidden layers requested, at most {MAX_HIDDEN_LAYERS} supported",
                self.hidden.len()
            )));
        }
        Ok(())
    }

    /// `(in, out)` for each affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

#[inline]
pub fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

#[inline]
pub fn elu_prime(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// Affine layer, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.in_dim).zip(&self.bias) {
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    spec: BackboneSpec,
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and hidden pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGradients {
    pub layers: Vec<Dense>,
    pub input: Vec<f64>,
}

impl BackboneGradients {
    pub fn zeros(spec: &BackboneSpec) -> Self {
        BackboneGradients {
            layers: spec.layer_dims().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect(),
            input: vec![0.0; spec.input_dim],
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
    }
}

impl BackboneParams {
    pub fn zeros(spec: BackboneSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layer_dims().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect();
        Ok(BackboneParams { spec, layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: BackboneSpec, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(params)
    }

    pub fn from_layers(spec: BackboneSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if dims.len() != layers.len() {
            return Err(Error::domain(format!("{} layers given, spec needs {}", layers.len(), dims.len())));
        }
        for (k, ((i, o), l)) in dims.iter().zip(&layers).enumerate() {
            if l.in_dim != *i || l.out_dim != *o || l.weights.len() != i * o || l.bias.len() != *o {
                return Err(Error::domain(format!("layer {k} does not match a {i} -> {o} affine map")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("layer {k} holds non-finite values")));
            }
        }
        Ok(BackboneParams { spec, layers })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Layer by layer: weights then bias.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
    }

    /// Inverse of [`flatten_into`](Self::flatten_into); returns the number of values consumed.
    pub fn load_flat(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        pos
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.spec.input_dim {
            return Err(Error::domain(format!("input has {} features, expected {}", x.len(), self.spec.input_dim)));
        }
        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(n_hidden);
        let mut current = x.to_vec();
        for layer in &self.layers[..n_hidden] {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.apply(&current, &mut z);
            let next = z.iter().map(|&v| elu(v)).collect();
            inputs.push(std::mem::replace(&mut current, next));
            pre_activations.push(z);
        }
        let mut output = Vec::with_capacity(self.spec.output_dim);
        self.layers[n_hidden].apply(&current, &mut output);
        inputs.push(current);
        Ok((output, ForwardCache { inputs, pre_activations }))
    }

    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<BackboneGradients> {
        let mut grads = BackboneGradients::zeros(&self.spec);
        self.backward_accumulate(cache, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sample's parameter gradients into `grads`; `grads.input` is
    /// overwritten with the gradient for this sample's input.
    pub fn backward_accumulate(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut BackboneGradients) -> Result<()> {
        self.check_cache(cache)?;
        if upstream.len() != self.spec.output_dim {
            return Err(Error::domain(format!(
                "upstream has length {}, expected {}",
                upstream.len(),
                self.spec.output_dim
            )));
        }
        let mut delta = upstream.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &cache.inputs[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (w, &x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            let mut back = vec![0.0; layer.in_dim];
            for (row, &d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                for (b, &w) in back.iter_mut().zip(row) {
                    *b += w * d;
                }
            }
            if k > 0 {
                for (b, &z) in back.iter_mut().zip(&cache.pre_activations[k - 1]) {
                    *b *= elu_prime(z);
                }
            }
            delta = back;
        }
        grads.input = delta;
        Ok(())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let ok = cache.inputs.len() == self.layers.len()
            && cache.pre_activations.len() + 1 == self.layers.len()
            && self.layers.iter().zip(&cache.inputs).all(|(l, x)| l.in_dim == x.len())
            && self.layers.iter().zip(&cache.pre_activations).all(|(l, z)| l.out_dim == z.len());
        if ok {
            Ok(())
        } else {
            Err(Error::domain("forward cache does not match these backbone parameters"))
        }
    }
}
