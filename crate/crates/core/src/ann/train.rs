use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{
    loss_preact_norm, loss_weight_sum, mean_std, preact_norm_grads, sigmoid_mse, softmax_cross_entropy,
    weight_sum_grads, LossTerms, PreActTarget, TaskLoss,
};
use super::network::{Mode, Network};
use super::optim::{sgd_step, MomentumState, TrainConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    /// The input itself is the target.
    Reconstruction,
}

/// Flat row-major samples plus their targets.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub inputs: &'a [f64],
    pub sample_len: usize,
    pub targets: Targets<'a>,
}

impl TrainData<'_> {
    pub fn len(&self) -> usize {
        self.inputs.len() / self.sample_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub task_loss: f64,
    pub weight_sum_loss: f64,
    pub preact_loss: f64,
    /// Largest per-neuron `|Σw − 1|` seen after any step of the epoch.
    pub max_step_deviation: f64,
    /// Hidden-layer pre-activation batch mean / std, averaged over batches.
    pub preact_mean: f64,
    pub preact_std: f64,
    pub validation: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOutcome {
    pub log: Vec<EpochStats>,
    pub steps: usize,
    pub max_step_deviation: f64,
}

/// Loss terms and weight gradients of the full objective on one batch.
#[derive(Clone, Debug)]
pub struct Objective {
    pub terms: LossTerms,
    pub grads: Vec<Tensor>,
    pub preact_targets: PreActTarget,
    /// Hidden pre-activations, in layer order.
    pub pre_activations: Vec<Tensor>,
}

/// Evaluates `L_task + λ_W·L_W + λ_A·L_A` and its gradient on a batch
/// without dropout. Pre-activation targets are derived from the batch unless
/// given, and are held fixed for differentiation either way.
pub fn evaluate_objective(
    net: &Network,
    inputs: &Tensor,
    targets: Targets<'_>,
    cfg: &TrainConfig,
    preact_targets: Option<&PreActTarget>,
) -> Result<Objective> {
    objective(net, net.as_batch(inputs)?, targets, cfg, preact_targets, Mode::Inference)
}

fn objective(
    net: &Network,
    batch: Tensor,
    targets: Targets<'_>,
    cfg: &TrainConfig,
    preact_targets: Option<&PreActTarget>,
    mode: Mode<'_>,
) -> Result<Objective> {
    let input = batch.clone();
    let trace = net.forward_trace(batch, mode)?;
    let (task, d_out) = match (cfg.task_loss, targets) {
        (TaskLoss::CrossEntropy, Targets::Labels(labels)) => softmax_cross_entropy(&trace.output, labels)?,
        (TaskLoss::MeanSquaredError, Targets::Reconstruction) => sigmoid_mse(&trace.output, &input)?,
        (loss, _) => {
            return Err(Error::Config(format!(
                "task loss {loss:?} does not match the kind of targets supplied"
            )))
        }
    };

    let hidden: Vec<usize> = net
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_constrained() && l.has_activation())
        .map(|(i, _)| i)
        .collect();
    let pre: Vec<Tensor> = hidden
        .iter()
        .map(|&i| trace.pre_activation(i).expect("constrained layer").clone())
        .collect();
    let preact_targets = match preact_targets {
        Some(t) => t.clone(),
        None => PreActTarget::from_pre_activations(&pre),
    };
    let preact = loss_preact_norm(&pre, &preact_targets)?;

    let mut extra = vec![None; net.layers().len()];
    if cfg.lambda_a > 0.0 {
        for (&i, g) in hidden.iter().zip(preact_norm_grads(&pre, &preact_targets)?) {
            extra[i] = Some(g.scale(cfg.lambda_a));
        }
    }
    let mut grads = net.backward(&trace, d_out, &extra)?;
    if cfg.lambda_w > 0.0 {
        for (g, s) in grads.iter_mut().zip(weight_sum_grads(net)) {
            for (a, b) in g.data_mut().iter_mut().zip(s.data()) {
                *a += cfg.lambda_w * b;
            }
        }
    }
    Ok(Objective {
        terms: LossTerms {
            task,
            weight_sum: loss_weight_sum(net),
            preact,
        },
        grads,
        preact_targets,
        pre_activations: pre,
    })
}

/// Mini-batch training with a deterministic sample order. `on_epoch` may
/// fill in a validation metric.
pub fn train(
    net: &mut Network,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&Network, &mut EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.sample_len != net.input_len() {
        return Err(Error::shape(format!(
            "samples of length {} for a network expecting {}",
            data.sample_len,
            net.input_len()
        )));
    }
    if let Targets::Labels(labels) = data.targets {
        if labels.len() != data.len() {
            return Err(Error::shape(format!("{} labels for {} samples", labels.len(), data.len())));
        }
    }
    let mut state = MomentumState::new(net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut outcome = TrainOutcome::default();
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut stats = EpochStats {
            epoch,
            lr: cfg.lr_at(epoch),
            ..EpochStats::default()
        };
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut x = Vec::with_capacity(chunk.len() * data.sample_len);
            batch_labels.clear();
            for &i in chunk {
                x.extend_from_slice(&data.inputs[i * data.sample_len..(i + 1) * data.sample_len]);
                if let Targets::Labels(labels) = data.targets {
                    batch_labels.push(labels[i]);
                }
            }
            let x = Tensor::new(vec![chunk.len(), data.sample_len], x)?;
            let targets = match data.targets {
                Targets::Labels(_) => Targets::Labels(&batch_labels),
                Targets::Reconstruction => Targets::Reconstruction,
            };
            let obj = objective(net, x, targets, cfg, None, Mode::Train(&mut rng))?;
            let total = obj.terms.total(cfg);
            if !total.is_finite() {
                return Err(Error::Diverged { epoch, loss: total });
            }
            sgd_step(net, &obj.grads, &mut state, cfg, epoch)?;
            let dev = net.max_weight_sum_deviation();
            stats.max_step_deviation = stats.max_step_deviation.max(dev);

            stats.task_loss += obj.terms.task;
            stats.weight_sum_loss += obj.terms.weight_sum;
            stats.preact_loss += obj.terms.preact;
            if !obj.pre_activations.is_empty() {
                let (mut m, mut s) = (0.0, 0.0);
                for z in &obj.pre_activations {
                    let (zm, zs) = mean_std(z.data());
                    m += zm;
                    s += zs;
                }
                stats.preact_mean += m / obj.pre_activations.len() as f64;
                stats.preact_std += s / obj.pre_activations.len() as f64;
            }
            batches += 1;
            outcome.steps += 1;
        }
        let n = batches.max(1) as f64;
        stats.task_loss /= n;
        stats.weight_sum_loss /= n;
        stats.preact_loss /= n;
        stats.preact_mean /= n;
        stats.preact_std /= n;
        outcome.max_step_deviation = outcome.max_step_deviation.max(stats.max_step_deviation);
        on_epoch(net, &mut stats);
        debug!(
            "epoch {epoch}: lr {:.2e} task {:.4} L_W {:.3e} L_A {:.3} max|Σw-1| {:.2e}",
            stats.lr, stats.task_loss, stats.weight_sum_loss, stats.preact_loss, stats.max_step_deviation
        );
        outcome.log.push(stats);
    }
    Ok(outcome)
}
