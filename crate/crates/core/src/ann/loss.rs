//! Task losses and the two constraint losses (weight-sum L1 and
//! pre-activation normalization L1).

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::optim::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskLoss {
    /// Softmax cross-entropy on raw final-layer pre-activations.
    CrossEntropy,
    /// Squared error between `sigmoid(output)` and the target, per sample.
    MeanSquaredError,
}

/// Weight sums within this distance of one count as feasible.
pub(crate) fn feasibility_tolerance(fan_in: usize) -> f64 {
    (fan_in as f64 * f64::EPSILON).clamp(4.0 * f64::EPSILON, 5e-13)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [batch, classes] = logits.dims2()?;
    if labels.len() != batch {
        return Err(Error::shape(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    let mut grad = vec![0.0; batch * classes];
    let mut loss = 0.0;
    for (b, (row, &label)) in logits.data().chunks(classes).zip(labels).enumerate() {
        if label >= classes {
            return Err(Error::Domain(format!("label {label} >= {classes} classes")));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
        let norm: f64 = exp.iter().sum();
        loss += norm.ln() + max - row[label];
        for (c, e) in exp.iter().enumerate() {
            let target = if c == label { 1.0 } else { 0.0 };
            grad[b * classes + c] = (e / norm - target) / batch as f64;
        }
    }
    Ok((loss / batch as f64, Tensor::new(vec![batch, classes], grad)?))
}

/// Squared error of `sigmoid(output)` against `target`, summed over the
/// elements of each sample and averaged over the batch, and its gradient
/// w.r.t. the raw output.
pub fn sigmoid_mse(output: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    output.expect_same_shape(target)?;
    let b = batch_of(output) as f64;
    let mut loss = 0.0;
    let grad = output.zip_map(target, |z, y| {
        let s = sigmoid(z);
        2.0 * (s - y) * s * (1.0 - s) / b
    })?;
    for (&z, &y) in output.data().iter().zip(target.data()) {
        loss += (sigmoid(z) - y).powi(2);
    }
    Ok((loss / b, grad))
}

/// `Σ_l Σ_i |Σ_j w_ij − 1|` over every constrained neuron.
pub fn loss_weight_sum(net: &Network) -> f64 {
    net.weight_sums()
        .iter()
        .flatten()
        .map(|s| (s - 1.0).abs())
        .sum()
}

/// Subgradient of [`loss_weight_sum`]: `sign(Σ_j w_ij − 1)` on every weight
/// of neuron i, zero for neurons that are feasible to accumulation precision.
pub fn weight_sum_grads(net: &Network) -> Vec<Tensor> {
    net.parameterized()
        .map(|(layer, w)| {
            let fan_in = layer.fan_in().expect("parameterized");
            let tol = feasibility_tolerance(fan_in);
            let mut g = Tensor::zeros(w.shape());
            for (row, grow) in w.data().chunks(fan_in).zip(g.data_mut().chunks_mut(fan_in)) {
                let dev = row.iter().sum::<f64>() - 1.0;
                if dev.abs() > tol {
                    grow.fill(dev.signum());
                }
            }
            g
        })
        .collect()
}

/// Per-layer targets `A^l` for the pre-activation loss.
#[derive(Clone, Debug, PartialEq)]
pub struct PreActTarget {
    pub layers: Vec<Tensor>,
}

impl PreActTarget {
    /// Standardizes each layer's pre-activation tensor over the whole batch
    /// to mean 0 and standard deviation 1/3.
    pub fn from_pre_activations(pre: &[Tensor]) -> Self {
        Self {
            layers: pre.iter().map(standardize).collect(),
        }
    }
}

fn standardize(z: &Tensor) -> Tensor {
    let (mean, std) = mean_std(z.data());
    if std > 0.0 {
        z.map(|v| (v - mean) / (3.0 * std))
    } else {
        z.map(|v| v - mean)
    }
}

pub(crate) fn mean_std(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn batch_of(z: &Tensor) -> usize {
    if z.rank() >= 2 {
        z.shape()[0]
    } else {
        1
    }
}

/// `Σ_l Σ_i |z_i^l − A_i^l|`, averaged over the samples of the batch.
pub fn loss_preact_norm(pre: &[Tensor], targets: &PreActTarget) -> Result<f64> {
    if pre.len() != targets.layers.len() {
        return Err(Error::shape(format!(
            "{} pre-activation layers but {} targets",
            pre.len(),
            targets.layers.len()
        )));
    }
    let mut total = 0.0;
    for (z, a) in pre.iter().zip(&targets.layers) {
        z.expect_same_shape(a)?;
        let sum: f64 = z.data().iter().zip(a.data()).map(|(z, a)| (z - a).abs()).sum();
        total += sum / batch_of(z) as f64;
    }
    Ok(total)
}

/// Gradient of [`loss_preact_norm`] w.r.t. each pre-activation, targets held fixed.
pub fn preact_norm_grads(pre: &[Tensor], targets: &PreActTarget) -> Result<Vec<Tensor>> {
    pre.iter()
        .zip(&targets.layers)
        .map(|(z, a)| {
            let b = batch_of(z) as f64;
            z.zip_map(a, |z, a| {
                let d = z - a;
                if d == 0.0 {
                    0.0
                } else {
                    d.signum() / b
                }
            })
        })
        .collect()
}

/// The three components of the training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub task: f64,
    pub weight_sum: f64,
    pub preact: f64,
}

impl LossTerms {
    pub fn total(&self, cfg: &TrainConfig) -> f64 {
        self.task + cfg.lambda_w * self.weight_sum + cfg.lambda_a * self.preact
    }
}

/// `L_task + λ_W·L_W + λ_A·L_A`.
pub fn total_loss(
    task_loss: f64,
    net: &Network,
    pre: &[Tensor],
    targets: &PreActTarget,
    cfg: &TrainConfig,
) -> Result<f64> {
    let terms = LossTerms {
        task: task_loss,
        weight_sum: loss_weight_sum(net),
        preact: loss_preact_norm(pre, targets)?,
    };
    Ok(terms.total(cfg))
}
