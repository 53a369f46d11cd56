//! Constrained analog networks: ReLU1 layers without biases, the weight-sum
//! and pre-activation losses, and momentum SGD with the hard weight-sum
//! projection applied after every update.

mod layer;
mod loss;
mod network;
mod optim;
mod train;

pub use layer::{relu1, Activation, LayerSpec};
pub use loss::{
    loss_preact_norm, loss_weight_sum, preact_norm_grads, sigmoid, sigmoid_mse, softmax_cross_entropy,
    total_loss, weight_sum_grads, LossTerms, PreActTarget, TaskLoss,
};
pub use network::{dropout, AnnOutput, Network, DENSE_INIT_STD};
pub use optim::{project_weight_sums, projected, sgd_step, LrSchedule, MomentumState, TrainConfig};
pub use train::{evaluate_objective, train, EpochStats, Objective, Targets, TrainData, TrainOutcome};

use crate::error::Result;
use crate::tensor::Tensor;

/// Forward pass; see [`Network::forward`].
pub fn ann_forward(net: &Network, input: &Tensor, record: bool) -> Result<AnnOutput> {
    net.forward(input, record)
}
