//! Per-layer spike-time gap between the discrete integrator and the exact
//! solver as the number of steps per window grows. Each layer is fed the
//! same exact input frame so only its own quantization is measured.
//!
//! cargo run --example quantization

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use ttfs::ann::{projected, Activation, LayerSpec, Network};
use ttfs::convert::{convert, encode_input};
use ttfs::sim::{simulate_layer, SimConfig};
use ttfs::tensor::Tensor;

fn main() -> ttfs::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = Normal::new(1.0 / 32.0, 0.25).unwrap();
    let net = projected(&Network::with_weights(
        vec![
            LayerSpec::dense(32, 32, Activation::Relu1),
            LayerSpec::dense(32, 32, Activation::Relu1),
            LayerSpec::dense(32, 4, Activation::None),
        ],
        vec![
            Tensor::from_fn(&[32, 32], |_| n.sample(&mut rng)),
            Tensor::from_fn(&[32, 32], |_| n.sample(&mut rng)),
            Tensor::from_fn(&[4, 32], |_| n.sample(&mut rng)),
        ],
    )?);
    let c = convert(&net, false)?;
    let samples: Vec<Vec<f64>> = (0..20)
        .map(|_| Uniform::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(32).collect())
        .collect();

    println!("steps  dt       max gap  ratio to dt");
    for steps in [10, 40, 160, 640] {
        let cfg = SimConfig::discrete(steps);
        let mut worst: f64 = 0.0;
        for x in &samples {
            let mut frame = encode_input(x)?;
            for layer in c.snn.layers.iter().filter(|l| !l.readout) {
                let exact = simulate_layer(layer, &frame, &c.schedule, &SimConfig::exact(), false)?;
                let disc = simulate_layer(layer, &frame, &c.schedule, &cfg, false)?;
                for (a, b) in exact.frame.times.iter().zip(&disc.frame.times) {
                    worst = worst.max((a.unwrap() - b.unwrap()).abs());
                }
                frame = exact.frame;
            }
        }
        println!("{steps:<5}  {:.5}  {worst:.5}  {:.3}", cfg.dt(), worst / cfg.dt());
    }
    Ok(())
}
