//! Conversion of a constrained analog network into a TTFS spiking network.
//!
//! Population `l` (0 = encoded input, 1..=L = weighted layers) owns the time
//! window `[l·T, (l+1)·T)` with `T = 1`. Activation `a` of population `l`
//! is carried by a single spike at `t = (l+1)·T − a·T`; activation 0 is a
//! forced spike exactly at the window end.

use serde::{Deserialize, Serialize};

use crate::ann::{Activation, LayerSpec, Network};
use crate::error::{Error, Result};
use crate::tensor::{Shape2D, Tensor};

/// Window length. Fixed for every layer.
pub const WINDOW: f64 = 1.0;
/// Firing threshold inside a window.
pub const THRESHOLD: f64 = 1.0;
/// Largest per-neuron weight-sum deviation accepted by the audit.
pub const MAX_WEIGHT_SUM_DEVIATION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn for_layer(layer: usize) -> Self {
        Self {
            start: layer as f64 * WINDOW,
            end: (layer + 1) as f64 * WINDOW,
        }
    }

    /// `[start, end]`: the closing boundary is where forced spikes land.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerWindow {
    pub layer: usize,
    pub window: TimeWindow,
    /// Output population: infinite threshold, read out as membrane potential.
    pub readout: bool,
}

/// Per-population windows realizing the piecewise dynamic threshold:
/// infinite before the window opens, `THRESHOLD` inside it, and a forced
/// spike when it closes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub window_len: f64,
    pub threshold: f64,
    pub windows: Vec<LayerWindow>,
}

impl ThresholdSchedule {
    /// Windows for the input population plus `weighted_layers` layers, the
    /// last of which is the readout layer.
    pub fn new(weighted_layers: usize) -> Self {
        let windows = (0..=weighted_layers)
            .map(|layer| LayerWindow {
                layer,
                window: TimeWindow::for_layer(layer),
                readout: layer == weighted_layers,
            })
            .collect();
        Self {
            window_len: WINDOW,
            threshold: THRESHOLD,
            windows,
        }
    }

    pub fn window(&self, layer: usize) -> TimeWindow {
        self.windows[layer].window
    }

    /// Index of the readout population.
    pub fn depth(&self) -> usize {
        self.windows.len() - 1
    }

    /// End of the readout window: the total simulated time.
    pub fn horizon(&self) -> f64 {
        self.windows.last().map_or(0.0, |w| w.window.end)
    }

    /// Threshold seen by population `layer` at time `t`.
    pub fn threshold_at(&self, layer: usize, t: f64) -> f64 {
        let w = self.window(layer);
        if self.windows[layer].readout || t < w.start {
            f64::INFINITY
        } else if t < w.end {
            self.threshold
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// One spike per neuron of one population. `None` marks a neuron that never
/// fired, which only happens under the fixed-threshold ablation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeFrame {
    pub layer: usize,
    pub times: Vec<Option<f64>>,
}

impl SpikeFrame {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn silent(&self) -> usize {
        self.times.iter().filter(|t| t.is_none()).count()
    }

    pub fn spikes(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.iter().flatten().copied()
    }
}

/// Maps activations in [0, 1] to input spike times `t = T·(1 − a)`.
pub fn encode_input(activations: &[f64]) -> Result<SpikeFrame> {
    let times = activations
        .iter()
        .map(|&a| {
            if (0.0..=1.0).contains(&a) {
                Ok(Some(WINDOW * (1.0 - a)))
            } else {
                Err(Error::Domain(format!("input activation {a} outside [0, 1]")))
            }
        })
        .collect::<Result<_>>()?;
    Ok(SpikeFrame { layer: 0, times })
}

/// Inverse of the encoding for population `layer`: `a = (l+1)·T − t`.
/// Errors on spikes outside the window or silent neurons.
pub fn decode_spikes(frame: &SpikeFrame, layer: usize) -> Result<Vec<f64>> {
    if frame.layer != layer {
        return Err(Error::Sequencing {
            expected: layer,
            got: frame.layer,
        });
    }
    let w = TimeWindow::for_layer(layer);
    frame
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| match t {
            Some(t) if w.contains(*t) => Ok(if *t == w.end { 0.0 } else { (w.end - t) / WINDOW }),
            Some(t) => Err(Error::Domain(format!(
                "neuron {i} of layer {layer} spiked at {t}, outside [{}, {}]",
                w.start, w.end
            ))),
            None => Err(Error::Domain(format!("neuron {i} of layer {layer} never spiked"))),
        })
        .collect()
}

/// Like [`decode_spikes`] but total: out-of-window spikes decode to values
/// outside [0, 1] and silent neurons decode to 0. Used to measure the damage
/// done by the fixed-threshold ablation.
pub fn decode_spikes_lenient(frame: &SpikeFrame) -> Vec<f64> {
    let end = TimeWindow::for_layer(frame.layer).end;
    frame
        .times
        .iter()
        .map(|t| t.map_or(0.0, |t| (end - t) / WINDOW))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDeviation {
    /// Index into the network's layer list.
    pub layer: usize,
    pub kind: String,
    pub max_deviation: f64,
    pub mean_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationIssue {
    pub layer: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvertReport {
    pub deviations: Vec<LayerDeviation>,
    pub activation_issues: Vec<ActivationIssue>,
    pub passed: bool,
    pub forced: bool,
    pub warnings: Vec<String>,
}

impl ConvertReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().map(|d| d.max_deviation).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> String {
        let mut parts = vec![format!("max weight-sum deviation {:.3e}", self.max_deviation())];
        for d in self.deviations.iter().filter(|d| d.max_deviation > MAX_WEIGHT_SUM_DEVIATION) {
            parts.push(format!("layer {} ({}) deviates by up to {:.3e}", d.layer, d.kind, d.max_deviation));
        }
        for issue in &self.activation_issues {
            parts.push(format!("layer {} uses {:?} instead of ReLU1", issue.layer, issue.activation));
        }
        parts.join("; ")
    }
}

/// Audits weight sums and hidden activations.
pub fn verify_convertibility(net: &Network) -> ConvertReport {
    let sums = net.weight_sums();
    let deviations: Vec<LayerDeviation> = net
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_constrained())
        .zip(sums)
        .map(|((i, l), sums)| {
            let devs: Vec<f64> = sums.iter().map(|s| (s - 1.0).abs()).collect();
            LayerDeviation {
                layer: i,
                kind: l.name().to_string(),
                max_deviation: devs.iter().copied().fold(0.0, f64::max),
                mean_deviation: devs.iter().sum::<f64>() / devs.len() as f64,
            }
        })
        .collect();
    let activation_issues: Vec<ActivationIssue> = net
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.has_activation() && l.activation() != Activation::Relu1)
        .map(|(i, l)| ActivationIssue {
            layer: i,
            activation: l.activation(),
        })
        .collect();
    let passed = activation_issues.is_empty()
        && deviations.iter().all(|d| d.max_deviation <= MAX_WEIGHT_SUM_DEVIATION);
    ConvertReport {
        deviations,
        activation_issues,
        passed,
        forced: false,
        warnings: Vec::new(),
    }
}

/// How a spiking layer is wired to the population before it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Connectivity {
    Dense {
        inputs: usize,
        outputs: usize,
        weights: Tensor,
    },
    Conv {
        input: Shape2D,
        output: Shape2D,
        kernel: usize,
        stride: usize,
        padding: usize,
        weights: Tensor,
    },
    /// Average pooling as a spiking layer with frozen `1/window²` weights.
    Pool {
        input: Shape2D,
        output: Shape2D,
        window: usize,
    },
}

impl Connectivity {
    pub fn inputs(&self) -> usize {
        match self {
            Connectivity::Dense { inputs, .. } => *inputs,
            Connectivity::Conv { input, .. } | Connectivity::Pool { input, .. } => input.len(),
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Connectivity::Dense { outputs, .. } => *outputs,
            Connectivity::Conv { output, .. } | Connectivity::Pool { output, .. } => output.len(),
        }
    }

    /// Visits the synapses of `neuron` as `(source, weight)`; `None` is a
    /// zero-padding position.
    pub fn for_each_synapse(&self, neuron: usize, mut f: impl FnMut(Option<usize>, f64)) {
        match self {
            Connectivity::Dense { inputs, weights, .. } => {
                let row = &weights.data()[neuron * inputs..(neuron + 1) * inputs];
                for (j, &w) in row.iter().enumerate() {
                    f(Some(j), w);
                }
            }
            Connectivity::Conv {
                input,
                output,
                kernel,
                stride,
                padding,
                weights,
            } => {
                let per_map = output.height * output.width;
                let (co, rest) = (neuron / per_map, neuron % per_map);
                let (oy, ox) = (rest / output.width, rest % output.width);
                let k = *kernel;
                let kd = weights.data();
                for ci in 0..input.channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let w = kd[((co * input.channels + ci) * k + ky) * k + kx];
                            let y = (oy * stride + ky) as isize - *padding as isize;
                            let x = (ox * stride + kx) as isize - *padding as isize;
                            if y < 0 || x < 0 || y >= input.height as isize || x >= input.width as isize {
                                f(None, w);
                            } else {
                                f(Some((ci * input.height + y as usize) * input.width + x as usize), w);
                            }
                        }
                    }
                }
            }
            Connectivity::Pool { input, output, window } => {
                let per_map = output.height * output.width;
                let (c, rest) = (neuron / per_map, neuron % per_map);
                let (oy, ox) = (rest / output.width, rest % output.width);
                let w = 1.0 / (window * window) as f64;
                for dy in 0..*window {
                    for dx in 0..*window {
                        f(
                            Some((c * input.height + oy * window + dy) * input.width + ox * window + dx),
                            w,
                        );
                    }
                }
            }
        }
    }

    /// Every input neuron of a dense layer sees the same presynaptic order,
    /// which the simulator exploits.
    pub fn dense_weights(&self) -> Option<(usize, &[f64])> {
        match self {
            Connectivity::Dense { inputs, weights, .. } => Some((*inputs, weights.data())),
            _ => None,
        }
    }

    pub fn weights(&self) -> Option<&Tensor> {
        match self {
            Connectivity::Dense { weights, .. } | Connectivity::Conv { weights, .. } => Some(weights),
            Connectivity::Pool { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikingLayer {
    /// Population index; the layer reads from population `index - 1`.
    pub index: usize,
    pub connectivity: Connectivity,
    pub readout: bool,
}

impl SpikingLayer {
    pub fn neurons(&self) -> usize {
        self.connectivity.outputs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork {
    pub input_len: usize,
    pub layers: Vec<SpikingLayer>,
}

impl SpikingNetwork {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, SpikingLayer::neurons)
    }
}

#[derive(Clone, Debug)]
pub struct Conversion {
    pub snn: SpikingNetwork,
    pub schedule: ThresholdSchedule,
    pub report: ConvertReport,
}

/// Copies the analog weights into a spiking network. Refuses networks that
/// fail [`verify_convertibility`] unless `force` is set, in which case the
/// report records a warning.
pub fn convert(net: &Network, force: bool) -> Result<Conversion> {
    let mut report = verify_convertibility(net);
    if !report.passed {
        if !force {
            return Err(Error::ConversionRefused(Box::new(report)));
        }
        report.forced = true;
        report
            .warnings
            .push(format!("conversion forced despite failed audit: {}", report.summary()));
    }
    let mut layers = Vec::new();
    let mut weights = net.weights().iter();
    for spec in net.layers() {
        let connectivity = match spec {
            LayerSpec::Dense { inputs, outputs, .. } => Connectivity::Dense {
                inputs: *inputs,
                outputs: *outputs,
                weights: weights.next().expect("one tensor per dense layer").clone(),
            },
            LayerSpec::Conv2d {
                input,
                kernel,
                stride,
                padding,
                ..
            } => Connectivity::Conv {
                input: *input,
                output: spec.output_shape2d()?.expect("conv output"),
                kernel: *kernel,
                stride: *stride,
                padding: *padding,
                weights: weights.next().expect("one tensor per conv layer").clone(),
            },
            LayerSpec::AvgPool { input, window } => Connectivity::Pool {
                input: *input,
                output: spec.output_shape2d()?.expect("pool output"),
                window: *window,
            },
            LayerSpec::Dropout { .. } | LayerSpec::Flatten { .. } => continue,
        };
        layers.push(SpikingLayer {
            index: layers.len() + 1,
            connectivity,
            readout: false,
        });
    }
    if let Some(last) = layers.last_mut() {
        last.readout = true;
    }
    let schedule = ThresholdSchedule::new(layers.len());
    Ok(Conversion {
        snn: SpikingNetwork {
            input_len: net.input_len(),
            layers,
        },
        schedule,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::projected;

    fn net(rows: &[&[f64]], act: Activation) -> Network {
        let w1 = Tensor::from_rows(rows);
        let [h, i] = w1.dims2().unwrap();
        Network::with_weights(
            vec![LayerSpec::dense(i, h, act), LayerSpec::dense(h, 1, Activation::None)],
            vec![w1, Tensor::filled(&[1, h], 1.0 / h as f64)],
        )
        .unwrap()
    }

    #[test]
    fn encode_examples() {
        let f = encode_input(&[0.8, 1.0, 0.0]).unwrap();
        let t: Vec<f64> = f.spikes().collect();
        assert!((t[0] - 0.2).abs() < 1e-15);
        assert_eq!(t[1], 0.0);
        assert_eq!(t[2], 1.0);
        assert!(encode_input(&[1.2]).is_err());
        assert!(encode_input(&[-0.1]).is_err());
    }

    #[test]
    fn decode_examples() {
        let f = SpikeFrame {
            layer: 1,
            times: vec![Some(1.36), Some(2.0), Some(1.0)],
        };
        let a = decode_spikes(&f, 1).unwrap();
        assert!((a[0] - 0.64).abs() < 1e-15);
        assert_eq!(a[1], 0.0);
        assert_eq!(a[2], 1.0);
        assert!(decode_spikes(&f, 0).is_err());
        let out = SpikeFrame {
            layer: 1,
            times: vec![Some(0.5)],
        };
        assert!(decode_spikes(&out, 1).is_err());
        assert_eq!(decode_spikes_lenient(&out), vec![1.5]);

        let f0 = encode_input(&[0.8]).unwrap();
        assert!((decode_spikes(&f0, 0).unwrap()[0] - 0.8).abs() <= f64::EPSILON);
    }

    #[test]
    fn audit_verdicts() {
        let feasible = projected(&net(&[&[0.3, 0.9], &[2.0, 0.1]], Activation::Relu1));
        let r = verify_convertibility(&feasible);
        assert!(r.passed, "{}", r.summary());
        assert!(r.max_deviation() <= 1e-12);

        let warped = net(&[&[0.3, 0.9], &[2.0, 0.1]], Activation::Relu1);
        let r = verify_convertibility(&warped);
        assert!(!r.passed);
        assert!((r.deviations[0].max_deviation - 1.1).abs() < 1e-12);

        let relu = projected(&net(&[&[0.3, 0.9]], Activation::Relu));
        let r = verify_convertibility(&relu);
        assert!(!r.passed);
        assert_eq!(r.activation_issues.len(), 1);
    }

    #[test]
    fn convert_copies_weights_and_chains_windows() {
        let ann = projected(&net(&[&[0.3, 0.9], &[2.0, 0.1], &[0.5, 0.5]], Activation::Relu1));
        let c = convert(&ann, false).unwrap();
        assert_eq!(c.snn.depth(), 2);
        for (layer, w) in c.snn.layers.iter().zip(ann.weights()) {
            let copied = layer.connectivity.weights().unwrap();
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(copied), bits(w));
        }
        assert!(c.snn.layers[1].readout && !c.snn.layers[0].readout);
        assert_eq!(c.schedule.windows.len(), 3);
        for pair in c.schedule.windows.windows(2) {
            assert_eq!(pair[0].window.end, pair[1].window.start);
        }
        assert_eq!(c.schedule.windows[0].window.start, 0.0);
        assert_eq!(c.schedule.horizon(), 3.0);
    }

    #[test]
    fn refusal_and_force() {
        let warped = net(&[&[0.3, 0.9]], Activation::Relu1);
        match convert(&warped, false) {
            Err(Error::ConversionRefused(r)) => assert!(!r.passed),
            other => panic!("expected refusal, got {other:?}"),
        }
        let c = convert(&warped, true).unwrap();
        assert!(c.report.forced);
        assert_eq!(c.report.warnings.len(), 1);
    }

    #[test]
    fn threshold_is_piecewise() {
        let s = ThresholdSchedule::new(2);
        assert_eq!(s.threshold_at(1, 0.5), f64::INFINITY);
        assert_eq!(s.threshold_at(1, 1.5), 1.0);
        assert_eq!(s.threshold_at(1, 2.0), f64::NEG_INFINITY);
        assert_eq!(s.threshold_at(2, 2.5), f64::INFINITY);
    }
}
