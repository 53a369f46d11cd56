//! Constrained ANN training and lossless conversion to time-to-first-spike
//! (TTFS) spiking networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f64` tensors, matmul / conv2d / avgpool and their
//!   analytic backward rules.
//! - [`ann`]: bias-free networks with ReLU1 activations, the weight-sum and
//!   pre-activation losses, the hard weight-sum projection and momentum SGD.
//! - [`convert`]: convertibility audit, threshold schedule, input encoding
//!   and spike-time decoding.
//! - [`sim`]: the spiking network executed window by window with either a
//!   discrete-time integrator or an exact event solver.
//! - [`metrics`]: conversion error, accuracy, PSNR/SSIM, spike histograms
//!   and the SynOPs/NeuronOPs power proxy.
//! - [`io`]: IDX loading, the model container, experiment configs and the
//!   train/convert/evaluate/ablate workflows used by the `ttfs` binary.

pub mod ann;
pub mod convert;
pub mod error;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
