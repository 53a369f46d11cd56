use serde::{Deserialize, Serialize};

use super::loss::{feasibility_tolerance, TaskLoss};
use super::network::Network;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    /// Divide the rate by `factor` at each milestone (fractions of the epoch budget).
    Step { milestones: Vec<f64>, factor: f64 },
    /// Cosine annealing from the base rate to zero over the epoch budget.
    Cosine,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Step {
            milestones: vec![0.6, 0.8, 0.9],
            factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub seed: u64,
    pub batch_size: usize,
    pub task_loss: TaskLoss,
    /// Project every neuron back onto `Σ_j w_ij = 1` after each update.
    pub hard_projection: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_w: 0.1,
            lambda_a: 0.01,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            epochs: 20,
            schedule: LrSchedule::default(),
            seed: 0,
            batch_size: 64,
            task_loss: TaskLoss::CrossEntropy,
            hard_projection: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.lambda_w < 0.0 || self.lambda_a < 0.0 {
            return Err(Error::Config("loss weights must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return Err(Error::Config("momentum must lie in [0, 1) and weight decay be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if let LrSchedule::Step { milestones, factor } = &self.schedule {
            let in_range = milestones.iter().all(|m| *m > 0.0 && *m < 1.0);
            let increasing = milestones.windows(2).all(|w| w[0] < w[1]);
            if !in_range || !increasing || *factor <= 0.0 {
                return Err(Error::Config(format!(
                    "milestones must be strictly increasing in (0, 1) with a positive factor, got {milestones:?} / {factor}"
                )));
            }
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let total = self.epochs.max(1) as f64;
        match &self.schedule {
            LrSchedule::Step { milestones, factor } => {
                let passed = milestones
                    .iter()
                    .filter(|m| epoch as f64 >= (*m * total).round())
                    .count();
                self.learning_rate / factor.powi(passed as i32)
            }
            LrSchedule::Cosine => {
                0.5 * self.learning_rate * (1.0 + (std::f64::consts::PI * epoch as f64 / total).cos())
            }
        }
    }
}

/// Momentum buffers, one per weight tensor.
#[derive(Clone, Debug)]
pub struct MomentumState {
    buffers: Vec<Tensor>,
}

impl MomentumState {
    pub fn new(net: &Network) -> Self {
        Self {
            buffers: net.weights().iter().map(|w| Tensor::zeros(w.shape())).collect(),
        }
    }
}

/// One momentum-SGD update with L2 weight decay, followed by the weight-sum
/// projection when `cfg.hard_projection` is set.
pub fn sgd_step(
    net: &mut Network,
    grads: &[Tensor],
    state: &mut MomentumState,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    if grads.len() != net.weights().len() {
        return Err(Error::shape(format!(
            "{} gradients for {} weight tensors",
            grads.len(),
            net.weights().len()
        )));
    }
    let lr = cfg.lr_at(epoch);
    for ((w, g), buf) in net.weights_mut().iter_mut().zip(grads).zip(&mut state.buffers) {
        w.expect_same_shape(g)?;
        for ((wi, gi), bi) in w.data_mut().iter_mut().zip(g.data()).zip(buf.data_mut()) {
            let d = gi + cfg.weight_decay * *wi;
            *bi = cfg.momentum * *bi + d;
            *wi -= lr * *bi;
        }
    }
    if cfg.hard_projection {
        project_weight_sums(net);
    }
    Ok(())
}

/// Moves every constrained neuron onto the hyperplane `Σ_j w_ij = 1` by
/// subtracting the deviation evenly from its `fan_in` weights (the Euclidean
/// projection). Rows already feasible to accumulation precision are left
/// untouched, which makes the map idempotent.
pub fn project_weight_sums(net: &mut Network) {
    let fan_ins: Vec<usize> = net
        .layers()
        .iter()
        .filter_map(|l| l.fan_in())
        .collect();
    for (w, fan_in) in net.weights_mut().iter_mut().zip(fan_ins) {
        project_rows(w.data_mut(), fan_in);
    }
}

/// Projected copy of `net`.
pub fn projected(net: &Network) -> Network {
    let mut out = net.clone();
    project_weight_sums(&mut out);
    out
}

pub(crate) fn project_rows(data: &mut [f64], fan_in: usize) {
    let tol = feasibility_tolerance(fan_in);
    for row in data.chunks_mut(fan_in) {
        // a second pass mops up rounding left by the first
        for _ in 0..4 {
            let dev = row.iter().sum::<f64>() - 1.0;
            if dev.abs() <= tol {
                break;
            }
            let shift = dev / fan_in as f64;
            for w in row.iter_mut() {
                *w -= shift;
            }
        }
    }
}
