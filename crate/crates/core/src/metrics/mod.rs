//! Conversion fidelity, task quality, spike statistics and the energy proxy.

mod histogram;
mod report;

pub use histogram::{spike_histogram, write_histogram_csv, SpikeHistogram};
pub use report::{evaluate_pair, EvalOptions, EvalTask, RunReport, TaskMetrics};

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuron-update weight for the ReL-PSP kernel, which costs one addition.
pub const NEURON_OP_WEIGHT_RELPSP: f64 = 1.0;
/// Neuron-update weight commonly assumed for leaky neurons.
pub const NEURON_OP_WEIGHT_LIF: f64 = 10.0;
/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    /// Spike deliveries: every emitted spike times its fan-out.
    pub syn_ops: u64,
    /// Neuron state updates.
    pub neuron_ops: u64,
}

impl OpCounters {
    pub fn new(syn_ops: u64, neuron_ops: u64) -> Self {
        Self { syn_ops, neuron_ops }
    }
}

impl Add for OpCounters {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            syn_ops: self.syn_ops + rhs.syn_ops,
            neuron_ops: self.neuron_ops + rhs.neuron_ops,
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// `syn_ops + neuron_op_weight · neuron_ops`.
pub fn power_proxy(counters: OpCounters, neuron_op_weight: f64) -> Result<f64> {
    if !(neuron_op_weight >= 0.0) || !neuron_op_weight.is_finite() {
        return Err(Error::Config(format!(
            "neuron op weight must be a nonnegative number, got {neuron_op_weight}"
        )));
    }
    Ok(counters.syn_ops as f64 + neuron_op_weight * counters.neuron_ops as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerError {
    pub layer: usize,
    pub mean: f64,
    pub max: f64,
    pub count: u64,
}

impl LayerError {
    fn absorb(&mut self, ann: &[f64], snn: &[f64]) {
        let n = self.count as f64;
        let (mut sum, mut max) = (0.0, self.max);
        for (a, b) in ann.iter().zip(snn) {
            let d = (a - b).abs();
            sum += d;
            max = max.max(d);
        }
        let total = n + ann.len() as f64;
        if total > 0.0 {
            self.mean = (self.mean * n + sum) / total;
        }
        self.max = max;
        self.count += ann.len() as u64;
    }
}

/// Per-layer mean and max of `|a_ann − a_snn|` for one sample.
pub fn conversion_error(ann: &[Vec<f64>], snn: &[Vec<f64>]) -> Result<Vec<LayerError>> {
    let mut acc = ErrorAccumulator::default();
    acc.add(ann, snn)?;
    Ok(acc.finish())
}

/// Running per-layer conversion error over many samples.
#[derive(Clone, Debug, Default)]
pub struct ErrorAccumulator {
    layers: Vec<LayerError>,
}

impl ErrorAccumulator {
    pub fn add(&mut self, ann: &[Vec<f64>], snn: &[Vec<f64>]) -> Result<()> {
        if ann.len() != snn.len() {
            return Err(Error::shape(format!(
                "{} analog layers vs {} spiking layers",
                ann.len(),
                snn.len()
            )));
        }
        if self.layers.is_empty() {
            self.layers = (0..ann.len())
                .map(|layer| LayerError {
                    layer,
                    ..LayerError::default()
                })
                .collect();
        } else if self.layers.len() != ann.len() {
            return Err(Error::shape("layer count changed between samples"));
        }
        for (l, (a, s)) in ann.iter().zip(snn).enumerate() {
            if a.len() != s.len() {
                return Err(Error::shape(format!(
                    "layer {l}: {} analog vs {} spiking values",
                    a.len(),
                    s.len()
                )));
            }
            self.layers[l].absorb(a, s);
        }
        Ok(())
    }

    pub fn finish(self) -> Vec<LayerError> {
        self.layers
    }
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::shape("accuracy of an empty set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// `10·log10(peak² / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    if reference.len() != test.len() || reference.is_empty() {
        return Err(Error::shape(format!(
            "psnr needs equal nonempty images, got {} and {}",
            reference.len(),
            test.len()
        )));
    }
    let mse = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), averaged over
/// all window positions fully inside the image.
pub fn ssim(reference: &[f64], test: &[f64], height: usize, width: usize, peak: f64) -> Result<f64> {
    if reference.len() != height * width || test.len() != height * width {
        return Err(Error::shape(format!(
            "ssim expects {height}x{width} images, got {} and {} values",
            reference.len(),
            test.len()
        )));
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "image {height}x{width} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let g = gaussian_window();
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let mut total = 0.0;
    let (oh, ow) = (height - SSIM_WINDOW + 1, width - SSIM_WINDOW + 1);
    for y in 0..oh {
        for x in 0..ow {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (dy, gy) in g.iter().enumerate() {
                for (dx, gx) in g.iter().enumerate() {
                    let w = gy * gx;
                    let i = (y + dy) * width + x + dx;
                    let (a, b) = (reference[i], test[i]);
                    mx += w * a;
                    my += w * b;
                    sxx += w * a * a;
                    syy += w * b * b;
                    sxy += w * a * b;
                }
            }
            let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (oh * ow) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_proxy_examples() {
        assert_eq!(power_proxy(OpCounters::new(12, 0), 1.0).unwrap(), 12.0);
        assert_eq!(power_proxy(OpCounters::new(0, 5), 10.0).unwrap(), 50.0);
        assert_eq!(power_proxy(OpCounters::default(), 1.0).unwrap(), 0.0);
        assert!(matches!(power_proxy(OpCounters::new(1, 1), -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2], &[1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 2]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn argmax_picks_first_max() {
        assert_eq!(argmax(&[0.2, 0.7]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn psnr_examples() {
        let a = vec![0.3; 16];
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP);
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&[0.0; 4], &[1.0; 4], 1.0).unwrap(), 0.0);
        assert!(psnr(&[0.0; 4], &[1.0; 3], 1.0).is_err());
    }

    fn gradient(n: usize) -> Vec<f64> {
        (0..n * n).map(|i| ((i / n) + (i % n)) as f64 / (2 * n - 2) as f64).collect()
    }

    #[test]
    fn ssim_examples() {
        let g = gradient(16);
        assert_eq!(ssim(&g, &g, 16, 16, 1.0).unwrap(), 1.0);
        let inv: Vec<f64> = g.iter().map(|v| 1.0 - v).collect();
        assert!(ssim(&g, &inv, 16, 16, 1.0).unwrap() < 0.0);
        let c = vec![0.4; 256];
        assert_eq!(ssim(&c, &c, 16, 16, 1.0).unwrap(), 1.0);
        assert!(ssim(&[0.0; 100], &[0.0; 100], 10, 10, 1.0).is_err());
    }

    #[test]
    fn conversion_error_reduces_per_layer() {
        let e = conversion_error(&[vec![0.5, 0.2], vec![1.0]], &[vec![0.5, 0.3], vec![0.7]]).unwrap();
        assert!((e[0].mean - 0.05).abs() < 1e-12 && (e[0].max - 0.1).abs() < 1e-12);
        assert!((e[1].max - 0.3).abs() < 1e-12);
        assert!(conversion_error(&[vec![0.5]], &[vec![0.5, 0.1]]).is_err());
    }
}
