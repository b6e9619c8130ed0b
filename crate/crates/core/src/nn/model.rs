use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{LayerSpec, ModelSpec};
use super::{sigmoid, NetError, Tensor};
use crate::dataset::Dataset;

/// Parameters of one layer. Trainable tensors come first in `trainable()` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerState {
    Dense { weight: Tensor, bias: Tensor },
    Conv1d { weight: Tensor, bias: Tensor },
    BatchNorm { gamma: Tensor, beta: Tensor, running_mean: Tensor, running_var: Tensor },
    Stateless,
}

impl LayerState {
    pub fn trainable(&self) -> Vec<&Tensor> {
        match self {
            Self::Dense { weight, bias } | Self::Conv1d { weight, bias } => vec![weight, bias],
            Self::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            Self::Stateless => Vec::new(),
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Self::Dense { weight, bias } | Self::Conv1d { weight, bias } => vec![weight, bias],
            Self::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            Self::Stateless => Vec::new(),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub layers: Vec<LayerState>,
    pub seed: u64,
    /// Bumped by every optimizer step; caches from older versions are stale.
    pub version: u64,
}

/// Gradients aligned with `LayerState::trainable()` for every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<Tensor>>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Batch statistics and dropout; dropout masks derive from `mask_seed`.
    Train { mask_seed: u64 },
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Plain,
    BatchNorm { xhat: Vec<f64>, inv_std: Vec<f64>, mean: Vec<f64>, var: Vec<f64> },
    Dropout { mask: Vec<f64> },
}

/// Activations saved by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Tensor>,
    layers: Vec<LayerCache>,
    train: bool,
    version: u64,
    batch: usize,
}

impl ForwardCache {
    /// Input that layer `index` received.
    pub fn layer_input(&self, index: usize) -> Option<&Tensor> {
        self.inputs.get(index)
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.gen_range(-bound..=bound)).collect())
}

/// Weights from `Uniform(-sqrt(1/fan_in), sqrt(1/fan_in))`, zero biases,
/// batchnorm scale 1 / shift 0 / running mean 0 / running variance 1.
pub fn init_model(spec: &ModelSpec, seed: u64) -> ModelState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layers()
        .iter()
        .map(|l| match *l {
            LayerSpec::Dense { inputs, outputs } => LayerState::Dense {
                weight: uniform(&mut rng, vec![outputs, inputs], (1.0 / inputs as f64).sqrt()),
                bias: Tensor::zeros(vec![outputs]),
            },
            LayerSpec::Conv1d { in_channels, out_channels, kernel, .. } => LayerState::Conv1d {
                weight: uniform(
                    &mut rng,
                    vec![out_channels, in_channels, kernel],
                    (1.0 / (in_channels * kernel) as f64).sqrt(),
                ),
                bias: Tensor::zeros(vec![out_channels]),
            },
            LayerSpec::BatchNorm1d { features, .. } => LayerState::BatchNorm {
                gamma: Tensor::filled(vec![features], 1.0),
                beta: Tensor::zeros(vec![features]),
                running_mean: Tensor::zeros(vec![features]),
                running_var: Tensor::filled(vec![features], 1.0),
            },
            _ => LayerState::Stateless,
        })
        .collect();
    ModelState { format_version: MODEL_FORMAT_VERSION, spec: spec.clone(), layers, seed, version: 0 }
}

fn mask_rng(mask_seed: u64, layer: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mask_seed ^ (layer as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl ModelState {
    /// `(n, d)` batch into the first layer's expected layout.
    fn prepare_input(&self, batch: &Tensor) -> Result<Tensor, NetError> {
        let d = self.spec.input_width();
        let (n, w) = match batch.shape() {
            [n, w] => (*n, *w),
            other => return Err(NetError::ShapeMismatch(format!("expected (n, {d}) batch, got {other:?}"))),
        };
        if w != d {
            return Err(NetError::ShapeMismatch(format!("model expects {d} features, batch has {w}")));
        }
        if !self.spec.sequence_input() {
            return Ok(batch.clone());
        }
        let len = self.spec.sequence_length();
        let mut values = vec![0.0; n * len];
        for (row, out) in batch.values().chunks_exact(d).zip(values.chunks_exact_mut(len)) {
            out[..d].copy_from_slice(row);
        }
        Ok(Tensor::new(vec![n, 1, len], values))
    }

    /// Runs the network on an `(n, d)` batch, returning `(n, 1)` logits.
    pub fn forward(&self, batch: &Tensor, mode: ForwardMode) -> Result<(Tensor, ForwardCache), NetError> {
        let mut x = self.prepare_input(batch)?;
        let n = x.shape()[0];
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (idx, (spec, state)) in self.spec.layers().iter().zip(&self.layers).enumerate() {
            let (y, cache) = forward_layer(spec, state, &x, mode, idx)?;
            inputs.push(x);
            caches.push(cache);
            x = y;
        }
        if !x.all_finite() {
            return Err(NetError::NonFinite("forward pass produced a non-finite logit".into()));
        }
        let cache = ForwardCache {
            inputs,
            layers: caches,
            train: matches!(mode, ForwardMode::Train { .. }),
            version: self.version,
            batch: n,
        };
        Ok((x, cache))
    }

    /// Reverse-mode pass from `dlogits` (`(n, 1)`) to parameter gradients.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Tensor) -> Result<Gradients, NetError> {
        if !cache.train || cache.version != self.version || cache.layers.len() != self.layers.len() {
            return Err(NetError::StaleCache);
        }
        if dlogits.shape() != [cache.batch, 1] {
            return Err(NetError::ShapeMismatch(format!(
                "dlogits shape {:?}, expected [{}, 1]",
                dlogits.shape(),
                cache.batch
            )));
        }
        let mut grads: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut dy = dlogits.clone();
        for idx in (0..self.layers.len()).rev() {
            let (dx, g) = backward_layer(
                &self.spec.layers()[idx],
                &self.layers[idx],
                &cache.inputs[idx],
                &cache.layers[idx],
                &dy,
            );
            grads[idx] = g;
            dy = dx;
        }
        Ok(Gradients { layers: grads })
    }

    /// Folds the batch statistics of a train-mode pass into the running estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        if !cache.train {
            return;
        }
        let n = cache.batch;
        for ((spec, state), lc) in self.spec.layers().iter().zip(self.layers.iter_mut()).zip(&cache.layers) {
            if let (
                LayerSpec::BatchNorm1d { momentum, .. },
                LayerState::BatchNorm { running_mean, running_var, .. },
                LayerCache::BatchNorm { mean, var, .. },
            ) = (spec, state, lc)
            {
                let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
                for (r, &m) in running_mean.values_mut().iter_mut().zip(mean) {
                    *r = (1.0 - momentum) * *r + momentum * m;
                }
                for (r, &v) in running_var.values_mut().iter_mut().zip(var) {
                    *r = (1.0 - momentum) * *r + momentum * v * unbias;
                }
            }
        }
    }

    /// Eval-mode logits for every row of `ds`.
    pub fn predict_logits(&self, ds: &Dataset) -> Result<Vec<f64>, NetError> {
        let batch = dataset_tensor(ds);
        Ok(self.forward(&batch, ForwardMode::Eval)?.0.into_values())
    }

    pub fn trainable(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.trainable())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let state: Self = serde_json::from_str(text).map_err(|e| NetError::Format(e.to_string()))?;
        if state.format_version != MODEL_FORMAT_VERSION {
            return Err(NetError::Format(format!("unsupported model format {}", state.format_version)));
        }
        Ok(state)
    }
}

/// Eval-mode probabilities (sigmoid of the logits).
pub fn predict_proba(state: &ModelState, ds: &Dataset) -> Result<Vec<f64>, NetError> {
    Ok(state.predict_logits(ds)?.into_iter().map(sigmoid).collect())
}

pub fn dataset_tensor(ds: &Dataset) -> Tensor {
    Tensor::new(vec![ds.n_samples(), ds.n_features()], ds.features().as_slice().to_vec())
}

fn forward_layer(
    spec: &LayerSpec,
    state: &LayerState,
    x: &Tensor,
    mode: ForwardMode,
    idx: usize,
) -> Result<(Tensor, LayerCache), NetError> {
    let shape = x.shape();
    match (spec, state) {
        (LayerSpec::Dense { inputs, outputs }, LayerState::Dense { weight, bias }) => {
            let n = shape[0];
            if shape != [n, *inputs] {
                return Err(NetError::ShapeMismatch(format!("dense expects [n, {inputs}], got {shape:?}")));
            }
            let (w, b) = (weight.values(), bias.values());
            let mut y = vec![0.0; n * outputs];
            for (xr, yr) in x.values().chunks_exact(*inputs).zip(y.chunks_exact_mut(*outputs)) {
                for (o, out) in yr.iter_mut().enumerate() {
                    let wr = &w[o * inputs..(o + 1) * inputs];
                    *out = b[o] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
                }
            }
            Ok((Tensor::new(vec![n, *outputs], y), LayerCache::Plain))
        }
        (LayerSpec::Relu, _) => {
            let y = x.values().iter().map(|&v| v.max(0.0)).collect();
            Ok((Tensor::new(shape.to_vec(), y), LayerCache::Plain))
        }
        (LayerSpec::BatchNorm1d { features, epsilon, .. }, LayerState::BatchNorm { gamma, beta, running_mean, running_var }) => {
            let n = shape[0];
            if shape != [n, *features] {
                return Err(NetError::ShapeMismatch(format!("batchnorm expects [n, {features}], got {shape:?}")));
            }
            let f = *features;
            let (mean, var) = match mode {
                ForwardMode::Train { .. } => {
                    let mut mean = vec![0.0; f];
                    for row in x.values().chunks_exact(f) {
                        for (m, v) in mean.iter_mut().zip(row) {
                            *m += v;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= n as f64);
                    let mut var = vec![0.0; f];
                    for row in x.values().chunks_exact(f) {
                        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                            *s += (v - m) * (v - m);
                        }
                    }
                    var.iter_mut().for_each(|s| *s /= n as f64);
                    (mean, var)
                }
                ForwardMode::Eval => (running_mean.values().to_vec(), running_var.values().to_vec()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();
            let mut xhat = vec![0.0; n * f];
            let mut y = vec![0.0; n * f];
            for ((xr, hr), yr) in x.values().chunks_exact(f).zip(xhat.chunks_exact_mut(f)).zip(y.chunks_exact_mut(f)) {
                for j in 0..f {
                    hr[j] = (xr[j] - mean[j]) * inv_std[j];
                    yr[j] = gamma.values()[j] * hr[j] + beta.values()[j];
                }
            }
            Ok((Tensor::new(vec![n, f], y), LayerCache::BatchNorm { xhat, inv_std, mean, var }))
        }
        (LayerSpec::Dropout { rate }, _) => match mode {
            ForwardMode::Train { mask_seed } if *rate > 0.0 => {
                let keep = 1.0 - rate;
                let mut rng = mask_rng(mask_seed, idx);
                let mask: Vec<f64> =
                    (0..x.len()).map(|_| if rng.gen::<f64>() >= *rate { 1.0 / keep } else { 0.0 }).collect();
                let y = x.values().iter().zip(&mask).map(|(v, m)| v * m).collect();
                Ok((Tensor::new(shape.to_vec(), y), LayerCache::Dropout { mask }))
            }
            _ => Ok((x.clone(), LayerCache::Plain)),
        },
        (
            LayerSpec::Conv1d { in_channels, out_channels, kernel, stride },
            LayerState::Conv1d { weight, bias },
        ) => {
            let (n, c, len) = match shape {
                [n, c, l] if *c == *in_channels && *l >= *kernel => (*n, *c, *l),
                _ => return Err(NetError::ShapeMismatch(format!("conv1d got input {shape:?}"))),
            };
            let (k, s, o_ch) = (*kernel, *stride, *out_channels);
            let out_len = (len - k) / s + 1;
            let (w, b, xv) = (weight.values(), bias.values(), x.values());
            let mut y = vec![0.0; n * o_ch * out_len];
            for ni in 0..n {
                let xs = &xv[ni * c * len..(ni + 1) * c * len];
                for o in 0..o_ch {
                    let yr = &mut y[(ni * o_ch + o) * out_len..(ni * o_ch + o + 1) * out_len];
                    for (t, out) in yr.iter_mut().enumerate() {
                        let mut acc = b[o];
                        for ci in 0..c {
                            let wk = &w[(o * c + ci) * k..(o * c + ci + 1) * k];
                            let xk = &xs[ci * len + t * s..ci * len + t * s + k];
                            acc += wk.iter().zip(xk).map(|(a, v)| a * v).sum::<f64>();
                        }
                        *out = acc;
                    }
                }
            }
            Ok((Tensor::new(vec![n, o_ch, out_len], y), LayerCache::Plain))
        }
        (LayerSpec::Flatten, _) => {
            let n = shape[0];
            let width = x.len() / n.max(1);
            Ok((x.clone().reshaped(vec![n, width]), LayerCache::Plain))
        }
        (spec, state) => Err(NetError::ShapeMismatch(format!("layer {spec:?} has mismatched state {state:?}"))),
    }
}

/// Returns `(dx, parameter gradients)` for one layer.
fn backward_layer(
    spec: &LayerSpec,
    state: &LayerState,
    x: &Tensor,
    cache: &LayerCache,
    dy: &Tensor,
) -> (Tensor, Vec<Tensor>) {
    match (spec, state) {
        (LayerSpec::Dense { inputs, outputs }, LayerState::Dense { weight, .. }) => {
            let (i_w, o_w) = (*inputs, *outputs);
            let w = weight.values();
            let mut dw = vec![0.0; o_w * i_w];
            let mut db = vec![0.0; o_w];
            let mut dx = vec![0.0; x.len()];
            for ((xr, dyr), dxr) in x.values().chunks_exact(i_w).zip(dy.values().chunks_exact(o_w)).zip(dx.chunks_exact_mut(i_w)) {
                for (o, &g) in dyr.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    let dwr = &mut dw[o * i_w..(o + 1) * i_w];
                    let wr = &w[o * i_w..(o + 1) * i_w];
                    for j in 0..i_w {
                        dwr[j] += g * xr[j];
                        dxr[j] += g * wr[j];
                    }
                }
            }
            (
                Tensor::new(x.shape().to_vec(), dx),
                vec![Tensor::new(vec![o_w, i_w], dw), Tensor::new(vec![o_w], db)],
            )
        }
        (LayerSpec::Relu, _) => {
            let dx = x.values().iter().zip(dy.values()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
            (Tensor::new(x.shape().to_vec(), dx), Vec::new())
        }
        (LayerSpec::BatchNorm1d { features, .. }, LayerState::BatchNorm { gamma, .. }) => {
            let LayerCache::BatchNorm { xhat, inv_std, .. } = cache else {
                unreachable!("batchnorm layer without batchnorm cache")
            };
            let f = *features;
            let n = x.shape()[0] as f64;
            let mut dgamma = vec![0.0; f];
            let mut dbeta = vec![0.0; f];
            for (hr, gr) in xhat.chunks_exact(f).zip(dy.values().chunks_exact(f)) {
                for j in 0..f {
                    dgamma[j] += gr[j] * hr[j];
                    dbeta[j] += gr[j];
                }
            }
            let g = gamma.values();
            let mut dx = vec![0.0; x.len()];
            for ((hr, gr), dxr) in xhat.chunks_exact(f).zip(dy.values().chunks_exact(f)).zip(dx.chunks_exact_mut(f)) {
                for j in 0..f {
                    // dxhat = dy * gamma; sums over the batch are dbeta * gamma and dgamma * gamma
                    dxr[j] = g[j] * inv_std[j] / n * (n * gr[j] - dbeta[j] - hr[j] * dgamma[j]);
                }
            }
            (
                Tensor::new(x.shape().to_vec(), dx),
                vec![Tensor::new(vec![f], dgamma), Tensor::new(vec![f], dbeta)],
            )
        }
        (LayerSpec::Dropout { .. }, _) => match cache {
            LayerCache::Dropout { mask } => {
                let dx = dy.values().iter().zip(mask).map(|(g, m)| g * m).collect();
                (Tensor::new(x.shape().to_vec(), dx), Vec::new())
            }
            _ => (dy.clone().reshaped(x.shape().to_vec()), Vec::new()),
        },
        (LayerSpec::Conv1d { kernel, stride, .. }, LayerState::Conv1d { weight, .. }) => {
            let (n, c, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (o_ch, out_len) = (dy.shape()[1], dy.shape()[2]);
            let (k, s) = (*kernel, *stride);
            let (w, xv, gv) = (weight.values(), x.values(), dy.values());
            let mut dw = vec![0.0; w.len()];
            let mut db = vec![0.0; o_ch];
            let mut dx = vec![0.0; x.len()];
            for ni in 0..n {
                for o in 0..o_ch {
                    let gr = &gv[(ni * o_ch + o) * out_len..(ni * o_ch + o + 1) * out_len];
                    for (t, &g) in gr.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        db[o] += g;
                        for ci in 0..c {
                            let base = (ni * c + ci) * len + t * s;
                            let wo = (o * c + ci) * k;
                            for kk in 0..k {
                                dw[wo + kk] += g * xv[base + kk];
                                dx[base + kk] += g * w[wo + kk];
                            }
                        }
                    }
                }
            }
            (
                Tensor::new(x.shape().to_vec(), dx),
                vec![Tensor::new(weight.shape().to_vec(), dw), Tensor::new(vec![o_ch], db)],
            )
        }
        (LayerSpec::Flatten, _) => (dy.clone().reshaped(x.shape().to_vec()), Vec::new()),
        _ => unreachable!("layer/state mismatch is rejected in forward"),
    }
}
