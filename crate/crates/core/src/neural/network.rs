//! Fully-connected networks with optional layer and spectral normalization.
//!
//! Layer `l` maps `a_{l-1}` to `z_l = a_{l-1} W_l + b_l` with `W_l` stored
//! row-major as `in x out`, so a sparse input only touches the rows of its
//! non-zero coordinates. Hidden layers apply layer normalization (when
//! enabled) and then ReLU; the output layer is affine. A single output is
//! read through a sigmoid, several through a softmax.
//!
//! With spectral normalization every layer uses `W / sigma` where
//! `sigma = u^T W v` and `(u, v)` are the persisted power-iteration vectors.
//! Gradients treat `(u, v)` as constants.

use std::borrow::Cow;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ops::{bilinear, power_iteration, sigmoid, softmax, LAYER_NORM_EPS, SPECTRAL_MIN_NORM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    pub layer_norm: bool,
    pub spectral_norm: bool,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::validation("network", format!("all dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// `(in, out)` for every affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_layers {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn n_layers(&self) -> usize {
        self.hidden_layers.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Persisted power-iteration vectors: `u` over inputs, `v` over outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub norm: Option<NormParams>,
    pub spectral: Option<SpectralState>,
}

impl LayerParams {
    fn sigma(&self) -> Option<f64> {
        let s = self.spectral.as_ref()?;
        let fro = self.weight.iter().map(|x| x * x).sum::<f64>().sqrt();
        if fro < SPECTRAL_MIN_NORM {
            return None;
        }
        Some(bilinear(&self.weight, self.in_dim, self.out_dim, &s.u, &s.v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerParams>,
    /// Bumped on every mutation; forward caches record it.
    version: u64,
}

impl NetworkParams {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases, unit
    /// gain, Gaussian power-iteration start vectors.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let n_layers = spec.n_layers();
        let mut layers = Vec::with_capacity(n_layers);
        for (l, (i, o)) in spec.layer_dims().into_iter().enumerate() {
            let bound = 1.0 / (i as f64).sqrt();
            let weight = (0..i * o).map(|_| rng.random_range(-bound..=bound)).collect();
            let hidden = l + 1 < n_layers;
            let norm = (spec.layer_norm && hidden).then(|| NormParams {
                gamma: vec![1.0; o],
                beta: vec![0.0; o],
            });
            let spectral = spec.spectral_norm.then(|| {
                let mut u: Vec<f64> = (0..i).map(|_| StandardNormal.sample(rng)).collect();
                let n = u.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
                u.iter_mut().for_each(|x| *x /= n);
                SpectralState { u, v: vec![0.0; o] }
            });
            layers.push(LayerParams {
                in_dim: i,
                out_dim: o,
                weight,
                bias: vec![0.0; o],
                norm,
                spectral,
            });
        }
        let mut params = NetworkParams {
            spec: spec.clone(),
            layers,
            version: 0,
        };
        params.power_iterate();
        Ok(params)
    }

    /// Assemble from explicit layers (checkpoint loading, tests).
    pub fn from_layers(spec: NetworkSpec, layers: Vec<LayerParams>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if dims.len() != layers.len() {
            return Err(Error::Contract(format!("{} layers for spec with {}", layers.len(), dims.len())));
        }
        for (l, ((i, o), layer)) in dims.iter().zip(&layers).enumerate() {
            let hidden = l + 1 < dims.len();
            let ok = layer.in_dim == *i
                && layer.out_dim == *o
                && layer.weight.len() == i * o
                && layer.bias.len() == *o
                && layer.norm.is_some() == (spec.layer_norm && hidden)
                && layer.norm.as_ref().is_none_or(|n| n.gamma.len() == *o && n.beta.len() == *o)
                && layer.spectral.is_some() == spec.spectral_norm
                && layer.spectral.as_ref().is_none_or(|s| s.u.len() == *i && s.v.len() == *o);
            if !ok {
                return Err(Error::Contract(format!("layer {l} does not match the network spec")));
            }
        }
        let params = NetworkParams { spec, layers, version: 0 };
        if !params.all_finite() {
            return Err(Error::numeric("network parameters", "non-finite entry"));
        }
        Ok(params)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn touch(&mut self) {
        self.version = self.version.wrapping_add(1);
    }

    /// One power-iteration round per spectrally-normalized layer.
    pub fn power_iterate(&mut self) {
        for layer in &mut self.layers {
            if let Some(s) = &mut layer.spectral {
                let fro = layer.weight.iter().map(|x| x * x).sum::<f64>().sqrt();
                if fro < SPECTRAL_MIN_NORM {
                    log::warn!("spectral normalization skipped: |W| = {fro:e}");
                    continue;
                }
                let (u, v, _) = power_iteration(&layer.weight, layer.in_dim, layer.out_dim, &s.u);
                s.u = u;
                s.v = v;
            }
        }
        self.touch();
    }

    /// Trainable tensors in a fixed order: per layer weight, bias, gamma, beta.
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.touch();
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
            if let Some(n) = &mut layer.norm {
                out.push(&mut n.gamma);
                out.push(&mut n.beta);
            }
        }
        out
    }

    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.weight);
            out.push(&layer.bias);
            if let Some(n) = &layer.norm {
                out.push(&n.gamma);
                out.push(&n.beta);
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.iter().chain(&l.bias).all(|v| v.is_finite())
                && l.norm.as_ref().is_none_or(|n| n.gamma.iter().chain(&n.beta).all(|v| v.is_finite()))
                && l.spectral.as_ref().is_none_or(|s| s.u.iter().chain(&s.v).all(|v| v.is_finite()))
        })
    }

    /// Digest of all trainable values, for trajectory comparisons.
    pub fn digest(&self) -> u64 {
        crate::rng::digest_f64(self.tensors().into_iter().flatten())
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            tensors: self.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }
}

/// Gradients in the same order as [`NetworkParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn fill_zero(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.iter_mut().for_each(|v| *v = 0.0));
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.iter_mut().for_each(|v| *v *= s));
    }

    pub fn add_scaled(&mut self, other: &Gradients, s: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Dense(&'a [f64]),
    Sparse { indices: &'a [u32], values: &'a [f64] },
}

impl Input<'_> {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Input::Dense(x) if x.len() != dim => {
                Err(Error::Contract(format!("input has {} entries, network expects {dim}", x.len())))
            }
            Input::Sparse { indices, values } => {
                if indices.len() != values.len() {
                    return Err(Error::Contract("sparse input index/value length mismatch".into()));
                }
                match indices.iter().find(|&&i| i as usize >= dim) {
                    Some(i) => Err(Error::Contract(format!("sparse index {i} outside input dim {dim}"))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct LayerCache {
    /// Layer input (for layers after the first).
    input: Vec<f64>,
    /// Normalized pre-activation (layer norm only).
    xhat: Vec<f64>,
    inv_std: f64,
    /// Value fed to the activation (or the output logits).
    post: Vec<f64>,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    version: u64,
    dense_input: Vec<f64>,
    sparse_input: Option<(Vec<u32>, Vec<f64>)>,
    layers: Vec<LayerCache>,
    /// Output-layer logits.
    pub logits: Vec<f64>,
    /// Sigmoid (single output) or softmax of the logits.
    pub output: Vec<f64>,
}

impl ForwardCache {
    /// ReLU on/off pattern of all hidden units (used to detect kinks in gradient checks).
    pub fn activation_pattern(&self) -> Vec<bool> {
        let n = self.layers.len();
        self.layers[..n.saturating_sub(1)]
            .iter()
            .flat_map(|l| l.post.iter().map(|&v| v > 0.0))
            .collect()
    }
}

/// A parameter set with its effective (possibly spectrally normalized)
/// weights materialized for repeated forward/backward passes.
pub struct Network<'p> {
    params: &'p NetworkParams,
    weights: Vec<Cow<'p, [f64]>>,
    sigmas: Vec<Option<f64>>,
}

impl<'p> Network<'p> {
    pub fn new(params: &'p NetworkParams) -> Self {
        let mut weights = Vec::with_capacity(params.layers.len());
        let mut sigmas = Vec::with_capacity(params.layers.len());
        for layer in &params.layers {
            match layer.sigma() {
                Some(s) => {
                    weights.push(Cow::Owned(layer.weight.iter().map(|w| w / s).collect()));
                    sigmas.push(Some(s));
                }
                None => {
                    weights.push(Cow::Borrowed(layer.weight.as_slice()));
                    sigmas.push(None);
                }
            }
        }
        Network { params, weights, sigmas }
    }

    pub fn params(&self) -> &NetworkParams {
        self.params
    }

    /// Effective weight matrix of layer `l` (after spectral scaling).
    pub fn effective_weight(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn forward(&self, x: Input<'_>) -> Result<ForwardCache> {
        let mut cache = ForwardCache::default();
        self.forward_into(x, &mut cache)?;
        Ok(cache)
    }

    /// Forward pass reusing the buffers of `cache`.
    pub fn forward_into(&self, x: Input<'_>, cache: &mut ForwardCache) -> Result<()> {
        let params = self.params;
        x.check(params.spec.input_dim)?;
        let n_layers = params.layers.len();
        cache.version = params.version;
        cache.layers.resize_with(n_layers, LayerCache::default);
        match x {
            Input::Dense(v) => {
                cache.dense_input.clear();
                cache.dense_input.extend_from_slice(v);
                cache.sparse_input = None;
            }
            Input::Sparse { indices, values } => {
                cache.dense_input.clear();
                cache.sparse_input = Some((indices.to_vec(), values.to_vec()));
            }
        }
        let mut act: Vec<f64> = Vec::new();
        for (l, layer) in params.layers.iter().enumerate() {
            let w = &self.weights[l];
            let out = layer.out_dim;
            let lc = &mut cache.layers[l];
            lc.post.clear();
            lc.post.extend_from_slice(&layer.bias);
            let z = &mut lc.post;
            if l == 0 {
                match x {
                    Input::Dense(v) => accumulate_dense(z, w, v, out),
                    Input::Sparse { indices, values } => {
                        for (&i, &xv) in indices.iter().zip(values) {
                            let row = &w[i as usize * out..(i as usize + 1) * out];
                            for (zj, wj) in z.iter_mut().zip(row) {
                                *zj += xv * wj;
                            }
                        }
                    }
                }
                lc.input.clear();
            } else {
                accumulate_dense(z, w, &act, out);
                lc.input.clear();
                lc.input.extend_from_slice(&act);
            }
            if let Some(norm) = &layer.norm {
                let n = out as f64;
                let mean = z.iter().sum::<f64>() / n;
                let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                lc.inv_std = inv;
                lc.xhat.clear();
                lc.xhat.extend(z.iter().map(|v| (v - mean) * inv));
                for j in 0..out {
                    z[j] = lc.xhat[j] * norm.gamma[j] + norm.beta[j];
                }
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("layer {l}"), "non-finite activation"));
            }
            if l + 1 < n_layers {
                act.clear();
                act.extend(z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }));
            }
        }
        let logits = &cache.layers[n_layers - 1].post;
        cache.logits.clear();
        cache.logits.extend_from_slice(logits);
        cache.output = if logits.len() == 1 {
            vec![sigmoid(logits[0])]
        } else {
            softmax(logits)
        };
        Ok(())
    }

    /// Accumulate `dL/dtheta` into `grads` (with respect to the effective
    /// weights; call [`Network::finish_gradients`] once per batch) and return
    /// `dL/dx` for dense inputs (empty for sparse ones).
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        let params = self.params;
        if cache.version != params.version || cache.layers.len() != params.layers.len() {
            return Err(Error::Contract("forward cache is stale for these parameters".into()));
        }
        if dlogits.len() != params.spec.output_dim {
            return Err(Error::Contract(format!(
                "loss gradient has {} entries, network outputs {}",
                dlogits.len(),
                params.spec.output_dim
            )));
        }
        let n_layers = params.layers.len();
        let mut slot = grad_slots(params);
        let mut dpost: Vec<f64> = dlogits.to_vec();
        let mut dinput = Vec::new();
        for l in (0..n_layers).rev() {
            let layer = &params.layers[l];
            let lc = &cache.layers[l];
            let out = layer.out_dim;
            if l + 1 < n_layers {
                for (d, &p) in dpost.iter_mut().zip(&lc.post) {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let dz: Vec<f64> = match &layer.norm {
                Some(norm) => {
                    let (gi, bi) = slot[l].2.expect("norm slots");
                    let dxhat: Vec<f64> = (0..out).map(|j| dpost[j] * norm.gamma[j]).collect();
                    for j in 0..out {
                        grads.tensors[gi][j] += dpost[j] * lc.xhat[j];
                        grads.tensors[bi][j] += dpost[j];
                    }
                    let n = out as f64;
                    let m1 = dxhat.iter().sum::<f64>() / n;
                    let m2 = dxhat.iter().zip(&lc.xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                    (0..out).map(|j| lc.inv_std * (dxhat[j] - m1 - lc.xhat[j] * m2)).collect()
                }
                None => dpost,
            };
            let (wi, bi, _) = slot[l];
            for (g, d) in grads.tensors[bi].iter_mut().zip(&dz) {
                *g += d;
            }
            let w = &self.weights[l];
            let need_input_grad = l > 0 || cache.sparse_input.is_none();
            let input: &[f64] = if l == 0 { &cache.dense_input } else { &lc.input };
            if l == 0 {
                if let Some((indices, values)) = &cache.sparse_input {
                    let gw = &mut grads.tensors[wi];
                    for (&i, &xv) in indices.iter().zip(values) {
                        let row = &mut gw[i as usize * out..(i as usize + 1) * out];
                        for (g, d) in row.iter_mut().zip(&dz) {
                            *g += xv * d;
                        }
                    }
                } else {
                    outer_accumulate(&mut grads.tensors[wi], input, &dz, out);
                }
            } else {
                outer_accumulate(&mut grads.tensors[wi], input, &dz, out);
            }
            if need_input_grad {
                let dprev: Vec<f64> = (0..layer.in_dim)
                    .map(|i| w[i * out..(i + 1) * out].iter().zip(&dz).map(|(a, b)| a * b).sum())
                    .collect();
                if l == 0 {
                    dinput = dprev;
                    dpost = Vec::new();
                } else {
                    dpost = dprev;
                }
            } else {
                dpost = Vec::new();
            }
        }
        slot.clear();
        Ok(dinput)
    }

    /// Map accumulated effective-weight gradients to raw-weight gradients for
    /// spectrally normalized layers: `dW = G/s - (<G, W>/s^2) u v^T`.
    pub fn finish_gradients(&self, grads: &mut Gradients) {
        let slots = grad_slots(self.params);
        for (l, layer) in self.params.layers.iter().enumerate() {
            let (Some(sigma), Some(s)) = (self.sigmas[l], &layer.spectral) else {
                continue;
            };
            let g = &mut grads.tensors[slots[l].0];
            let inner: f64 = g.iter().zip(&layer.weight).map(|(a, b)| a * b).sum();
            let c = inner / (sigma * sigma);
            let out = layer.out_dim;
            for i in 0..layer.in_dim {
                for j in 0..out {
                    let k = i * out + j;
                    g[k] = g[k] / sigma - c * s.u[i] * s.v[j];
                }
            }
        }
    }
}

/// Tensor indices per layer: (weight, bias, Some((gamma, beta))).
fn grad_slots(params: &NetworkParams) -> Vec<(usize, usize, Option<(usize, usize)>)> {
    let mut k = 0;
    params
        .layers
        .iter()
        .map(|l| {
            let w = k;
            let b = k + 1;
            k += 2;
            let n = l.norm.as_ref().map(|_| {
                k += 2;
                (k - 2, k - 1)
            });
            (w, b, n)
        })
        .collect()
}

fn accumulate_dense(z: &mut [f64], w: &[f64], x: &[f64], out: usize) {
    for (i, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let row = &w[i * out..(i + 1) * out];
        for (zj, wj) in z.iter_mut().zip(row) {
            *zj += xv * wj;
        }
    }
}

fn outer_accumulate(g: &mut [f64], x: &[f64], dz: &[f64], out: usize) {
    for (i, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let row = &mut g[i * out..(i + 1) * out];
        for (gj, dj) in row.iter_mut().zip(dz) {
            *gj += xv * dj;
        }
    }
}
