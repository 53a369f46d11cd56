//! Counts synaptic and neuron operations of a tiny network and prices them
//! with the ReL-PSP and leaky-neuron weightings.
//!
//! cargo run --example power_proxy

use ttfs::ann::{Activation, LayerSpec, Network};
use ttfs::convert::{convert, encode_input};
use ttfs::metrics::{power_proxy, NEURON_OP_WEIGHT_LIF, NEURON_OP_WEIGHT_RELPSP};
use ttfs::sim::{run_network, SimConfig};
use ttfs::tensor::Tensor;

fn main() -> ttfs::Result<()> {
    // 2 inputs -> 2 hidden -> 1 output
    let net = Network::with_weights(
        vec![
            LayerSpec::dense(2, 2, Activation::Relu1),
            LayerSpec::dense(2, 1, Activation::None),
        ],
        vec![
            Tensor::from_rows(&[&[0.6, 0.4], &[1.5, -0.5]]),
            Tensor::from_rows(&[&[0.5, 0.5]]),
        ],
    )?;
    let c = convert(&net, false)?;
    let input = encode_input(&[0.8, 0.4])?;
    for cfg in [SimConfig::discrete(50), SimConfig::discrete(10), SimConfig::exact()] {
        let run = run_network(&c.snn, &c.schedule, &input, &cfg)?;
        let k = run.counters;
        println!(
            "{:?} steps={:<3} SynOPs {:>3} NeuronOPs {:>4}  P(w=1) {:>6}  P(w=10) {:>6}",
            cfg.backend,
            cfg.steps_per_window,
            k.syn_ops,
            k.neuron_ops,
            power_proxy(k, NEURON_OP_WEIGHT_RELPSP)?,
            power_proxy(k, NEURON_OP_WEIGHT_LIF)?
        );
    }
    Ok(())
}
