#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ttfs::ann::{projected, Activation, LayerSpec, Network};
use ttfs::tensor::{Shape2D, Tensor};

/// Dense ReLU1 network with the given widths (input first), weights drawn
/// around `1/fan_in` with enough spread to exercise zero, partial and
/// saturated neurons, then projected onto weight sum one.
pub fn dense_net(widths: &[usize], seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
            let n = Normal::new(1.0 / w[0] as f64, 1.5 / (w[0] as f64).sqrt()).unwrap();
            Tensor::from_fn(&[w[1], w[0]], |_| n.sample(&mut rng))
        })
        .collect();
    projected(&Network::with_weights(layers, weights).unwrap())
}

/// 2 to 5 weighted layers with fan-in between 4 and 64.
pub fn random_dense_net(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let depth = rng.random_range(2..=5);
    let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(4..=64)).collect();
    dense_net(&widths, seed)
}

/// conv → avgpool → conv → flatten → dense on a 1×8×8 input.
pub fn conv_net(seed: u64) -> Network {
    let s = |c, h, w| Shape2D::new(c, h, w).unwrap();
    let layers = vec![
        LayerSpec::Conv2d {
            input: s(1, 8, 8),
            out_channels: 3,
            kernel: 3,
            stride: 1,
            padding: 1,
            activation: Activation::Relu1,
        },
        LayerSpec::AvgPool {
            input: s(3, 8, 8),
            window: 2,
        },
        LayerSpec::Conv2d {
            input: s(3, 4, 4),
            out_channels: 2,
            kernel: 3,
            stride: 1,
            padding: 0,
            activation: Activation::Relu1,
        },
        LayerSpec::Flatten { input: s(2, 2, 2) },
        LayerSpec::dense(8, 4, Activation::None),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(layers).unwrap();
    for w in net.weights_mut() {
        let fan_in = w.len() / w.shape()[0];
        let n = Normal::new(1.0 / fan_in as f64, 1.5 / (fan_in as f64).sqrt()).unwrap();
        for v in w.data_mut() {
            *v = n.sample(&mut rng);
        }
    }
    projected(&net)
}

pub fn random_input(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect()
}
