//! Converts a random weight-sum-constrained network and compares every
//! layer's decoded spike times with the analog activations, for the exact
//! solver and for the discrete integrator at several resolutions.
//!
//! cargo run --example lossless_conversion

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use ttfs::ann::{projected, Activation, LayerSpec, Network};
use ttfs::convert::{convert, decode_spikes, encode_input};
use ttfs::sim::{run_network, SimConfig};
use ttfs::tensor::Tensor;

fn main() -> ttfs::Result<()> {
    let widths = [64, 48, 32, 16, 10];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let layers: Vec<LayerSpec> = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 2 == widths.len() { Activation::None } else { Activation::Relu1 };
            LayerSpec::dense(w[0], w[1], act)
        })
        .collect();
    let weights = widths
        .windows(2)
        .map(|w| {
            let n = Normal::new(1.0 / w[0] as f64, 1.0 / (w[0] as f64).sqrt()).unwrap();
            Tensor::from_fn(&[w[1], w[0]], |_| n.sample(&mut rng))
        })
        .collect();
    let net = projected(&Network::with_weights(layers, weights)?);
    let conversion = convert(&net, false)?;
    println!("audit: {}", conversion.report.summary());

    let x: Vec<f64> = Uniform::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(64).collect();
    let ann = net.forward(&Tensor::new(vec![64], x.clone())?, true)?;
    let input = encode_input(&x)?;

    for cfg in [SimConfig::exact(), SimConfig::discrete(25), SimConfig::discrete(50), SimConfig::discrete(200)] {
        let run = run_network(&conversion.snn, &conversion.schedule, &input, &cfg)?;
        let mut errs = Vec::new();
        for (l, frame) in run.frames.iter().enumerate().skip(1) {
            let decoded = decode_spikes(frame, l)?;
            let ann_l = ann.activations[l].data();
            errs.push(decoded.iter().zip(ann_l).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        let out = run.output.iter().zip(ann.output.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "{:?} steps={:<4} per-layer max |a - a_snn| {:?}, readout {:.2e}",
            cfg.backend,
            cfg.steps_per_window,
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            out
        );
    }
    Ok(())
}
