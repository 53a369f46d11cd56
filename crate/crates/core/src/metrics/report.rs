use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{argmax, power_proxy, psnr, ssim, ErrorAccumulator, LayerError, OpCounters, SpikeHistogram};
use crate::ann::{sigmoid, Network};
use crate::convert::{decode_spikes_lenient, encode_input, Conversion};
use crate::error::{Error, Result};
use crate::sim::{run_network, Backend, SimConfig, ThresholdMode};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub ann_accuracy: Option<f64>,
    pub snn_accuracy: Option<f64>,
    /// Fraction of samples where both models pick the same class.
    pub argmax_agreement: Option<f64>,
    pub ann_psnr: Option<f64>,
    pub snn_psnr: Option<f64>,
    pub ann_ssim: Option<f64>,
    pub snn_ssim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub samples: usize,
    pub backend: Backend,
    pub threshold: ThresholdMode,
    pub steps_per_window: usize,
    pub task: TaskMetrics,
    /// Hidden layers first, then the readout potentials against the analog
    /// output pre-activations.
    pub conversion_error: Vec<LayerError>,
    pub counters: OpCounters,
    pub neuron_op_weight: f64,
    pub power_proxy: f64,
    pub out_of_window_fraction: f64,
    pub histograms: Vec<SpikeHistogram>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum EvalTask<'a> {
    Classification(&'a [usize]),
    /// Targets are the inputs; images are `height × width`.
    Reconstruction { height: usize, width: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub bins_per_window: usize,
    pub neuron_op_weight: f64,
    /// Evaluate at most this many samples.
    pub limit: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            bins_per_window: 50,
            neuron_op_weight: super::NEURON_OP_WEIGHT_RELPSP,
            limit: None,
        }
    }
}

/// Runs the analog network and its spiking conversion side by side on the
/// same inputs (`samples × input_len`, row-major).
pub fn evaluate_pair(
    ann: &Network,
    conversion: &Conversion,
    inputs: &[f64],
    task: EvalTask<'_>,
    cfg: &SimConfig,
    opts: &EvalOptions,
) -> Result<RunReport> {
    cfg.validate()?;
    let len = ann.input_len();
    if len == 0 || !inputs.len().is_multiple_of(len) {
        return Err(Error::shape(format!("{} values are not whole samples of {len}", inputs.len())));
    }
    let mut n = inputs.len() / len;
    if let Some(limit) = opts.limit {
        n = n.min(limit);
    }
    if let EvalTask::Classification(labels) = task {
        if labels.len() < n {
            return Err(Error::shape(format!("{} labels for {n} samples", labels.len())));
        }
    }
    if n == 0 {
        return Err(Error::shape("no samples to evaluate"));
    }

    let windows = conversion.schedule.windows.len();
    let mut hists: Vec<SpikeHistogram> = Vec::new();
    let mut errors = ErrorAccumulator::default();
    let mut counters = OpCounters::default();
    let (mut ann_hits, mut snn_hits, mut agree) = (0usize, 0usize, 0usize);
    let (mut ann_psnr, mut snn_psnr, mut ann_ssim, mut snn_ssim) = (0.0, 0.0, 0.0, 0.0);

    for s in 0..n {
        let x = &inputs[s * len..(s + 1) * len];
        let out = ann.forward(&Tensor::new(vec![len], x.to_vec())?, true)?;
        let run = run_network(&conversion.snn, &conversion.schedule, &encode_input(x)?, cfg)?;
        counters += run.counters;

        let depth = out.activations.len() - 1;
        let mut a: Vec<Vec<f64>> = out.activations[1..depth].iter().map(|t| t.data().to_vec()).collect();
        let mut d: Vec<Vec<f64>> = run.frames[1..].iter().map(decode_spikes_lenient).collect();
        a.push(out.output.data().to_vec());
        d.push(run.output.clone());
        errors.add(&a, &d)?;

        if hists.is_empty() {
            hists = super::spike_histogram(&run.frames, opts.bins_per_window, windows);
        } else {
            for (h, f) in hists.iter_mut().zip(&run.frames) {
                h.record(f);
            }
        }

        match task {
            EvalTask::Classification(labels) => {
                let (pa, ps) = (argmax(out.output.data()), argmax(&run.output));
                ann_hits += usize::from(pa == labels[s]);
                snn_hits += usize::from(ps == labels[s]);
                agree += usize::from(pa == ps);
            }
            EvalTask::Reconstruction { height, width } => {
                let ya: Vec<f64> = out.output.data().iter().map(|&v| sigmoid(v)).collect();
                let ys: Vec<f64> = run.output.iter().map(|&v| sigmoid(v)).collect();
                ann_psnr += psnr(x, &ya, 1.0)?;
                snn_psnr += psnr(x, &ys, 1.0)?;
                ann_ssim += ssim(x, &ya, height, width, 1.0)?;
                snn_ssim += ssim(x, &ys, height, width, 1.0)?;
            }
        }
    }

    let nf = n as f64;
    let task_metrics = match task {
        EvalTask::Classification(_) => TaskMetrics {
            ann_accuracy: Some(ann_hits as f64 / nf),
            snn_accuracy: Some(snn_hits as f64 / nf),
            argmax_agreement: Some(agree as f64 / nf),
            ..TaskMetrics::default()
        },
        EvalTask::Reconstruction { .. } => TaskMetrics {
            ann_psnr: Some(ann_psnr / nf),
            snn_psnr: Some(snn_psnr / nf),
            ann_ssim: Some(ann_ssim / nf),
            snn_ssim: Some(snn_ssim / nf),
            ..TaskMetrics::default()
        },
    };
    let hidden: Vec<&SpikeHistogram> = hists.iter().skip(1).collect();
    let (oow, total) = hidden.iter().fold((0, 0), |(o, t), h| (o + h.out_of_window, t + h.total() + h.silent));
    Ok(RunReport {
        samples: n,
        backend: cfg.backend,
        threshold: cfg.threshold,
        steps_per_window: cfg.steps_per_window,
        task: task_metrics,
        conversion_error: errors.finish(),
        counters,
        neuron_op_weight: opts.neuron_op_weight,
        power_proxy: power_proxy(counters, opts.neuron_op_weight)?,
        out_of_window_fraction: if total == 0 { 0.0 } else { oow as f64 / total as f64 },
        histograms: hists,
    })
}
