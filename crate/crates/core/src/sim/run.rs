use std::io::Write;

use super::neuron::{discrete_sorted, exact_sorted, sort_events, trace_neuron};
use super::{Backend, MembraneTrace, SimConfig, ThresholdMode};
use crate::ann::sigmoid;
use crate::convert::{SpikeFrame, SpikingLayer, SpikingNetwork, ThresholdSchedule};
use crate::error::{Error, Result};
use crate::metrics::OpCounters;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct LayerRun {
    /// Spikes of a hidden layer. For the readout layer every entry is `None`.
    pub frame: SpikeFrame,
    /// `Some` for the readout layer only.
    pub potentials: Option<Vec<f64>>,
    pub counters: OpCounters,
    pub traces: Option<Vec<MembraneTrace>>,
}

#[derive(Clone, Debug)]
pub struct NetworkRun {
    /// Readout-layer membrane potentials at window close.
    pub output: Vec<f64>,
    /// Input frame followed by one frame per hidden layer.
    pub frames: Vec<SpikeFrame>,
    pub counters: OpCounters,
    pub backend: Backend,
}

/// Runs one spiking layer over its window. With `record_traces` the
/// membrane potential of every neuron is kept from time 0 to window close.
pub fn simulate_layer(
    layer: &SpikingLayer,
    input: &SpikeFrame,
    schedule: &ThresholdSchedule,
    cfg: &SimConfig,
    record_traces: bool,
) -> Result<LayerRun> {
    cfg.validate()?;
    if input.layer + 1 != layer.index {
        return Err(Error::Sequencing {
            expected: layer.index - 1,
            got: input.layer,
        });
    }
    let conn = &layer.connectivity;
    if input.len() != conn.inputs() {
        return Err(Error::shape(format!(
            "layer {} expects {} input spikes, got {}",
            layer.index,
            conn.inputs(),
            input.len()
        )));
    }
    if layer.index >= schedule.windows.len() {
        return Err(Error::Config(format!("schedule has no window for layer {}", layer.index)));
    }
    let window = schedule.window(layer.index);
    let thr = schedule.threshold;
    let n = cfg.steps_per_window;
    let horizon_steps = schedule.windows.len() * n;
    // zero-padding taps behave like inputs with activation 0
    let pad_time = window.start;

    // dense layers share one presynaptic order across all neurons
    let dense_order: Option<Vec<usize>> = conn.dense_weights().map(|_| {
        let mut order: Vec<usize> = (0..input.len()).filter(|&j| input.times[j].is_some()).collect();
        order.sort_by(|&a, &b| input.times[a].unwrap().total_cmp(&input.times[b].unwrap()));
        order
    });

    let neurons = layer.neurons();
    let mut times = Vec::with_capacity(if layer.readout { 0 } else { neurons });
    let mut potentials = Vec::with_capacity(if layer.readout { neurons } else { 0 });
    let mut traces = record_traces.then(Vec::new);
    let mut counters = OpCounters::default();
    let mut events: Vec<(f64, f64)> = Vec::new();

    for i in 0..neurons {
        events.clear();
        match (&dense_order, conn.dense_weights()) {
            (Some(order), Some((fan_in, w))) => {
                let row = &w[i * fan_in..(i + 1) * fan_in];
                events.extend(order.iter().map(|&j| (input.times[j].unwrap(), row[j])));
                counters.syn_ops += order.len() as u64;
            }
            _ => {
                conn.for_each_synapse(i, |src, w| match src {
                    Some(j) => {
                        if let Some(t) = input.times[j] {
                            events.push((t, w));
                            counters.syn_ops += 1;
                        }
                    }
                    None => events.push((pad_time, w)),
                });
                sort_events(&mut events);
            }
        }

        if let Some(traces) = traces.as_mut() {
            let (t, w): (Vec<f64>, Vec<f64>) = events.iter().copied().unzip();
            traces.push(trace_neuron(&t, &w, (0.0, window.end), cfg)?);
        }

        if layer.readout {
            // V(close) − T·(arrived weight sum), summed term by term
            let v: f64 = events
                .iter()
                .take_while(|e| e.0 <= window.end)
                .map(|&(t, w)| w * (window.end - schedule.window_len - t))
                .sum();
            potentials.push(v);
            counters.neuron_ops += match cfg.backend {
                Backend::Discrete => n as u64,
                Backend::Exact => distinct_times(&events, window.end),
            };
            continue;
        }

        let spike = match (cfg.backend, cfg.threshold) {
            (Backend::Exact, ThresholdMode::Dynamic) => {
                let out = exact_sorted(&events, thr, window.start, window.end);
                counters.neuron_ops += out.events;
                Some(out.spike.unwrap_or(window.end))
            }
            (Backend::Exact, ThresholdMode::Fixed) => {
                let out = exact_sorted(&events, thr, 0.0, schedule.horizon());
                counters.neuron_ops += out.events;
                out.spike
            }
            (Backend::Discrete, ThresholdMode::Dynamic) => {
                counters.neuron_ops += n as u64;
                let k0 = layer.index * n;
                Some(discrete_sorted(&events, thr, cfg, k0, k0 + n).unwrap_or(window.end))
            }
            (Backend::Discrete, ThresholdMode::Fixed) => {
                counters.neuron_ops += horizon_steps as u64;
                discrete_sorted(&events, thr, cfg, 0, horizon_steps)
            }
        };
        times.push(spike);
    }

    Ok(LayerRun {
        frame: SpikeFrame {
            layer: layer.index,
            times: if layer.readout { vec![None; neurons] } else { times },
        },
        potentials: layer.readout.then_some(potentials),
        counters,
        traces,
    })
}

fn distinct_times(sorted: &[(f64, f64)], until: f64) -> u64 {
    let mut count = 0;
    let mut last = f64::NAN;
    for &(t, _) in sorted.iter().take_while(|e| e.0 <= until) {
        if t != last {
            count += 1;
            last = t;
        }
    }
    count
}

/// Discrete-backend simulation of a single layer, with per-neuron membrane
/// traces.
pub fn simulate_discrete(
    layer: &SpikingLayer,
    input: &SpikeFrame,
    schedule: &ThresholdSchedule,
    cfg: &SimConfig,
) -> Result<(SpikeFrame, Vec<MembraneTrace>)> {
    let cfg = SimConfig {
        backend: Backend::Discrete,
        ..*cfg
    };
    let run = simulate_layer(layer, input, schedule, &cfg, true)?;
    Ok((run.frame, run.traces.unwrap_or_default()))
}

/// Runs every layer in window order and reads out the final membrane
/// potentials.
pub fn run_network(
    snn: &SpikingNetwork,
    schedule: &ThresholdSchedule,
    input: &SpikeFrame,
    cfg: &SimConfig,
) -> Result<NetworkRun> {
    if input.layer != 0 {
        return Err(Error::Sequencing {
            expected: 0,
            got: input.layer,
        });
    }
    if input.len() != snn.input_len {
        return Err(Error::shape(format!(
            "network expects {} inputs, got {}",
            snn.input_len,
            input.len()
        )));
    }
    if schedule.windows.len() != snn.depth() + 1 {
        return Err(Error::Config(format!(
            "schedule has {} windows for a network of depth {}",
            schedule.windows.len(),
            snn.depth()
        )));
    }
    let mut frames = vec![input.clone()];
    let mut counters = OpCounters::default();
    let mut output = Vec::new();
    for layer in &snn.layers {
        let run = simulate_layer(layer, frames.last().unwrap(), schedule, cfg, false)?;
        counters += run.counters;
        match run.potentials {
            Some(v) => output = v,
            None => frames.push(run.frame),
        }
    }
    Ok(NetworkRun {
        output,
        frames,
        counters,
        backend: cfg.backend,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Potentials are logits; the class is their argmax.
    #[default]
    Logits,
    /// Potentials are squashed through the logistic function.
    Sigmoid,
}

pub fn readout_membrane(potentials: &[f64], readout: Readout) -> Tensor {
    let data = match readout {
        Readout::Logits => potentials.to_vec(),
        Readout::Sigmoid => potentials.iter().map(|&v| sigmoid(v)).collect(),
    };
    Tensor::new(vec![data.len()], data).expect("1-d tensor")
}

/// One `layer,neuron,time` row per spike; silent neurons get an empty time.
pub fn write_spike_trace<W: Write>(mut out: W, frames: &[SpikeFrame]) -> std::io::Result<()> {
    writeln!(out, "layer,neuron,time")?;
    for f in frames {
        for (i, t) in f.times.iter().enumerate() {
            match t {
                Some(t) => writeln!(out, "{},{},{}", f.layer, i, t)?,
                None => writeln!(out, "{},{},", f.layer, i)?,
            }
        }
    }
    Ok(())
}
