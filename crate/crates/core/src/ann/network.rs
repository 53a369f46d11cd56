use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, LayerSpec};
use crate::error::{Error, Result};
use crate::tensor::{avgpool2d, conv2d, gemm, layer_backward, BackwardOp, Tensor};

/// Standard deviation of fully-connected initial weights (variance 1e-4).
pub const DENSE_INIT_STD: f64 = 0.01;

/// A bias-free feed-forward network.
///
/// `weights[p]` belongs to the p-th parameterized layer (dense or conv) in
/// layer order. Dense weights are `[out, in]`, conv kernels
/// `[c_out, c_in, k, k]`; in both cases a "row" of `fan_in` consecutive
/// values feeds one neuron (or one output channel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<LayerSpec>,
    weights: Vec<Tensor>,
    input_len: usize,
}

/// Result of a forward pass over a batch.
#[derive(Clone, Debug)]
pub struct AnnOutput {
    /// Final-layer pre-activations, `[batch, outputs]`.
    pub output: Tensor,
    /// `activations[0]` is the input, `activations[s]` the output of the
    /// s-th weighted layer. Empty unless recording was requested.
    pub activations: Vec<Tensor>,
    /// `pre_activations[s - 1]` is the pre-activation of weighted layer s.
    pub pre_activations: Vec<Tensor>,
}

pub(crate) enum Mode<'r> {
    Inference,
    Train(&'r mut ChaCha8Rng),
}

pub(crate) struct LayerCache {
    input: Tensor,
    pre: Option<Tensor>,
    mask: Option<Tensor>,
}

pub(crate) struct ForwardTrace {
    pub caches: Vec<LayerCache>,
    pub output: Tensor,
}

impl ForwardTrace {
    /// Pre-activation of layer `index`, if it is a weighted layer.
    pub fn pre_activation(&self, index: usize) -> Option<&Tensor> {
        self.caches[index].pre.as_ref()
    }
}

impl Network {
    /// Builds a network with zero weights after checking the layer chain.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let input_len = validate(&layers)?;
        let weights = layers
            .iter()
            .filter_map(|l| l.param_shape())
            .map(|s| Tensor::zeros(&s))
            .collect();
        Ok(Self {
            layers,
            weights,
            input_len,
        })
    }

    /// Builds a network from explicit weights (one tensor per parameterized layer).
    pub fn with_weights(layers: Vec<LayerSpec>, weights: Vec<Tensor>) -> Result<Self> {
        let mut net = Self::new(layers)?;
        if weights.len() != net.weights.len() {
            return Err(Error::shape(format!(
                "expected {} weight tensors, got {}",
                net.weights.len(),
                weights.len()
            )));
        }
        for (slot, w) in net.weights.iter_mut().zip(weights) {
            if slot.shape() != w.shape() {
                return Err(Error::shape(format!(
                    "weight shape {:?} does not match layer {:?}",
                    w.shape(),
                    slot.shape()
                )));
            }
            *slot = w;
        }
        Ok(net)
    }

    /// Conv kernels ~ N(0, 2/(k²·n)) with n output channels, dense weights
    /// ~ N(0, 1e-4). Deterministic in `seed`.
    pub fn init_weights(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = 0;
        for layer in &self.layers {
            let std = match layer {
                LayerSpec::Dense { .. } => DENSE_INIT_STD,
                LayerSpec::Conv2d {
                    kernel,
                    out_channels,
                    ..
                } => (2.0 / (kernel * kernel * out_channels) as f64).sqrt(),
                _ => continue,
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            for w in self.weights[p].data_mut() {
                *w = normal.sample(&mut rng);
            }
            p += 1;
        }
    }

    pub fn initialized(layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut net = Self::new(layers)?;
        net.init_weights(seed);
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Tensor] {
        &mut self.weights
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        let mut len = self.input_len;
        for l in &self.layers {
            len = l.output_len(len).expect("validated");
        }
        len
    }

    /// Number of weighted (spiking) layers.
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| l.is_weighted()).count()
    }

    /// Parameterized layers paired with their weights, in order.
    pub fn parameterized(&self) -> impl Iterator<Item = (&LayerSpec, &Tensor)> {
        self.layers
            .iter()
            .filter(|l| l.param_shape().is_some())
            .zip(&self.weights)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Tensor::len).sum()
    }

    /// Per-neuron weight sums, one vector per parameterized layer.
    pub fn weight_sums(&self) -> Vec<Vec<f64>> {
        self.parameterized()
            .map(|(layer, w)| {
                let fan_in = layer.fan_in().expect("parameterized");
                w.data().chunks(fan_in).map(|row| row.iter().sum()).collect()
            })
            .collect()
    }

    /// Largest `|Σ_j w_ij − 1|` per parameterized layer.
    pub fn weight_sum_deviations(&self) -> Vec<f64> {
        self.weight_sums()
            .iter()
            .map(|sums| sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max))
            .collect()
    }

    pub fn max_weight_sum_deviation(&self) -> f64 {
        self.weight_sum_deviations().into_iter().fold(0.0, f64::max)
    }

    /// Replaces the activation of every hidden parameterized layer.
    pub fn with_hidden_activation(mut self, act: Activation) -> Self {
        let last = self.last_weighted();
        for (i, l) in self.layers.iter_mut().enumerate() {
            if Some(i) != last && l.has_activation() {
                l.set_activation(act);
            }
        }
        self
    }

    fn last_weighted(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| l.is_weighted())
    }

    /// Forward pass. `input` is `[batch, ...]` with trailing dims multiplying
    /// to the input length, or a single flat sample. Inputs must lie in [0, 1].
    pub fn forward(&self, input: &Tensor, record: bool) -> Result<AnnOutput> {
        let batch = self.as_batch(input)?;
        if let Some(bad) = batch.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("network input {bad} outside [0, 1]")));
        }
        let trace = self.forward_trace(batch, Mode::Inference)?;
        let mut activations = Vec::new();
        let mut pre_activations = Vec::new();
        if record {
            for (layer, cache) in self.layers.iter().zip(&trace.caches) {
                if layer.is_weighted() {
                    // dropout and flatten are identities at inference, so each
                    // weighted layer's output is the next weighted layer's input
                    if activations.is_empty() {
                        activations.push(cache.input.clone());
                    }
                    let pre = cache.pre.clone().expect("weighted layers cache pre-activations");
                    activations.push(pre.map(|x| layer.activation().apply(x)));
                    pre_activations.push(pre);
                }
            }
        }
        Ok(AnnOutput {
            output: trace.output,
            activations,
            pre_activations,
        })
    }

    pub(crate) fn as_batch(&self, input: &Tensor) -> Result<Tensor> {
        let shape = input.shape();
        let per_sample: usize = shape[1..].iter().product();
        if input.len() == self.input_len {
            return input.clone().reshape(&[1, self.input_len]);
        }
        if shape.len() >= 2 && per_sample == self.input_len {
            return input.clone().reshape(&[shape[0], self.input_len]);
        }
        Err(Error::shape(format!(
            "input {:?} does not match network input length {}",
            shape, self.input_len
        )))
    }

    pub(crate) fn forward_trace(&self, input: Tensor, mut mode: Mode<'_>) -> Result<ForwardTrace> {
        let batch = input.shape()[0];
        let mut x = input;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut p = 0;
        for layer in &self.layers {
            let (out, pre, mask) = match layer {
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => {
                    let w = &self.weights[p];
                    p += 1;
                    let mut z = vec![0.0; batch * outputs];
                    gemm(
                        batch,
                        *inputs,
                        *outputs,
                        x.data(),
                        (*inputs as isize, 1),
                        w.data(),
                        (1, *inputs as isize),
                        &mut z,
                        false,
                    );
                    let z = Tensor::new(vec![batch, *outputs], z)?;
                    (z.map(|v| activation.apply(v)), Some(z), None)
                }
                LayerSpec::Conv2d {
                    input,
                    stride,
                    padding,
                    activation,
                    ..
                } => {
                    let k = &self.weights[p];
                    p += 1;
                    let out_len = layer.output_len(0)?;
                    let mut z = Vec::with_capacity(batch * out_len);
                    for sample in x.data().chunks(input.len()) {
                        let s = Tensor::new(input.dims().to_vec(), sample.to_vec())?;
                        z.extend_from_slice(conv2d(&s, k, *stride, *padding)?.data());
                    }
                    let z = Tensor::new(vec![batch, out_len], z)?;
                    (z.map(|v| activation.apply(v)), Some(z), None)
                }
                LayerSpec::AvgPool { input, window } => {
                    let out_len = layer.output_len(0)?;
                    let mut z = Vec::with_capacity(batch * out_len);
                    for sample in x.data().chunks(input.len()) {
                        let s = Tensor::new(input.dims().to_vec(), sample.to_vec())?;
                        z.extend_from_slice(avgpool2d(&s, *window)?.data());
                    }
                    let z = Tensor::new(vec![batch, out_len], z)?;
                    (z.clone(), Some(z), None)
                }
                LayerSpec::Dropout { p: prob } => match &mut mode {
                    Mode::Train(rng) if *prob > 0.0 => {
                        let mask = dropout_mask(x.shape(), *prob, rng);
                        (x.zip_map(&mask, |a, m| a * m)?, None, Some(mask))
                    }
                    _ => (x.clone(), None, None),
                },
                LayerSpec::Flatten { .. } => (x.clone(), None, None),
            };
            caches.push(LayerCache { input: x, pre, mask });
            x = out;
        }
        Ok(ForwardTrace { caches, output: x })
    }

    /// Backpropagates `d_output` through a recorded trace. `extra_pre_grads`
    /// (indexed by layer) is added to the gradient at that layer's
    /// pre-activation. Returns one gradient per weight tensor.
    pub(crate) fn backward(
        &self,
        trace: &ForwardTrace,
        d_output: Tensor,
        extra_pre_grads: &[Option<Tensor>],
    ) -> Result<Vec<Tensor>> {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.weights.len()];
        let mut p = self.weights.len();
        let mut g = d_output;
        for (i, (layer, cache)) in self.layers.iter().zip(&trace.caches).enumerate().rev() {
            let batch = cache.input.shape()[0];
            if layer.is_weighted() {
                let pre = cache.pre.as_ref().expect("weighted layers cache pre-activations");
                g = match layer.activation() {
                    Activation::Relu1 => layer_backward(BackwardOp::Relu1 { pre }, &g)?.input,
                    Activation::Relu => layer_backward(BackwardOp::Relu { pre }, &g)?.input,
                    Activation::None => g,
                };
                if let Some(extra) = extra_pre_grads.get(i).and_then(Option::as_ref) {
                    g = g.zip_map(extra, |a, b| a + b)?;
                }
            }
            g = match layer {
                LayerSpec::Dense { .. } => {
                    p -= 1;
                    let r = layer_backward(
                        BackwardOp::Dense {
                            input: &cache.input,
                            weights: &self.weights[p],
                        },
                        &g,
                    )?;
                    grads[p] = r.params;
                    r.input
                }
                LayerSpec::Conv2d {
                    input,
                    stride,
                    padding,
                    ..
                } => {
                    p -= 1;
                    let k = &self.weights[p];
                    let out_len = g.shape()[1];
                    let mut dk = Tensor::zeros(k.shape());
                    let mut dx = Vec::with_capacity(batch * input.len());
                    for (xs, gs) in cache.input.data().chunks(input.len()).zip(g.data().chunks(out_len)) {
                        let xs = Tensor::new(input.dims().to_vec(), xs.to_vec())?;
                        let out_shape = layer.output_shape2d()?.expect("conv").dims().to_vec();
                        let gs = Tensor::new(out_shape, gs.to_vec())?;
                        let r = layer_backward(
                            BackwardOp::Conv2d {
                                input: &xs,
                                kernels: k,
                                stride: *stride,
                                padding: *padding,
                            },
                            &gs,
                        )?;
                        let rk = r.params.expect("conv has params");
                        for (a, b) in dk.data_mut().iter_mut().zip(rk.data()) {
                            *a += b;
                        }
                        dx.extend_from_slice(r.input.data());
                    }
                    grads[p] = Some(dk);
                    Tensor::new(vec![batch, input.len()], dx)?
                }
                LayerSpec::AvgPool { input, window } => {
                    let out_len = g.shape()[1];
                    let out_shape = layer.output_shape2d()?.expect("pool").dims().to_vec();
                    let mut dx = Vec::with_capacity(batch * input.len());
                    for gs in g.data().chunks(out_len) {
                        let gs = Tensor::new(out_shape.clone(), gs.to_vec())?;
                        let r = layer_backward(
                            BackwardOp::AvgPool {
                                input_shape: &input.dims(),
                                window: *window,
                            },
                            &gs,
                        )?;
                        dx.extend_from_slice(r.input.data());
                    }
                    Tensor::new(vec![batch, input.len()], dx)?
                }
                LayerSpec::Dropout { .. } => match &cache.mask {
                    Some(mask) => layer_backward(BackwardOp::Dropout { mask }, &g)?.input,
                    None => g,
                },
                LayerSpec::Flatten { .. } => g,
            };
        }
        Ok(grads
            .into_iter()
            .map(|g| g.expect("every parameterized layer produced a gradient"))
            .collect())
    }
}

/// Inverted dropout: each unit is zeroed with probability `p`, survivors are
/// scaled by `1/(1-p)`. Identity outside training.
pub fn dropout(x: &Tensor, p: f64, training: bool, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = dropout_mask(x.shape(), p, &mut rng);
    x.zip_map(&mask, |a, m| a * m)
}

fn dropout_mask(shape: &[usize], p: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let keep = 1.0 / (1.0 - p);
    Tensor::from_fn(shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Checks the layer chain and returns the network input length.
fn validate(layers: &[LayerSpec]) -> Result<usize> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
    if matches!(first, LayerSpec::Dropout { .. }) {
        return Err(Error::Config("network cannot start with dropout".into()));
    }
    let last_weighted = layers
        .iter()
        .rposition(|l| l.is_weighted())
        .ok_or_else(|| Error::Config("network has no weighted layer".into()))?;
    if last_weighted != layers.len() - 1 {
        return Err(Error::Config("the final layer must be a weighted layer".into()));
    }
    if !matches!(layers[last_weighted], LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. }) {
        return Err(Error::Config("the final layer must be dense or conv".into()));
    }
    let input_len = first.input_len();
    let mut len = input_len;
    for (i, layer) in layers.iter().enumerate() {
        if let LayerSpec::Dropout { p } = layer {
            if !(0.0..1.0).contains(p) {
                return Err(Error::Config(format!("layer {i}: dropout probability {p} outside [0, 1)")));
            }
        } else if layer.input_len() != len {
            return Err(Error::shape(format!(
                "layer {i} ({}) expects {} inputs but receives {len}",
                layer.name(),
                layer.input_len()
            )));
        }
        let is_final = i == last_weighted;
        match (layer.param_shape().is_some(), is_final, layer.activation()) {
            (true, true, Activation::None) | (true, false, Activation::Relu1 | Activation::Relu) => {}
            (true, true, _) => {
                return Err(Error::Config(
                    "the final layer is read out as membrane potential and takes no activation".into(),
                ))
            }
            (true, false, Activation::None) => {
                return Err(Error::Config(format!("hidden layer {i} needs an activation")))
            }
            _ => {}
        }
        len = layer.output_len(len)?;
    }
    Ok(input_len)
}
