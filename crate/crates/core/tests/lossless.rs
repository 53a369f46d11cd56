mod common;

use proptest::prelude::*;
use ttfs::ann::Network;
use ttfs::convert::{convert, decode_spikes, encode_input};
use ttfs::sim::{run_network, SimConfig};
use ttfs::tensor::Tensor;

fn max_layer_error(net: &Network, x: &[f64]) -> f64 {
    let c = convert(net, false).unwrap();
    let ann = net
        .forward(&Tensor::new(vec![x.len()], x.to_vec()).unwrap(), true)
        .unwrap();
    let run = run_network(&c.snn, &c.schedule, &encode_input(x).unwrap(), &SimConfig::exact()).unwrap();
    let mut worst: f64 = 0.0;
    for (l, frame) in run.frames.iter().enumerate().skip(1) {
        let decoded = decode_spikes(frame, l).unwrap();
        for (a, b) in decoded.iter().zip(ann.activations[l].data()) {
            worst = worst.max((a - b).abs());
        }
    }
    for (a, b) in run.output.iter().zip(ann.output.data()) {
        worst = worst.max((a - b).abs());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_backend_reproduces_dense_activations(seed in any::<u64>()) {
        let net = common::random_dense_net(seed);
        let x = common::random_input(net.input_len(), seed.wrapping_add(1));
        prop_assert!(max_layer_error(&net, &x) <= 1e-12);
    }

    #[test]
    fn exact_backend_reproduces_conv_activations(seed in any::<u64>()) {
        let net = common::conv_net(seed);
        let x = common::random_input(net.input_len(), seed.wrapping_add(7));
        prop_assert!(max_layer_error(&net, &x) <= 1e-12);
    }
}

#[test]
fn all_zero_input_propagates_zeros() {
    let net = common::dense_net(&[10, 8, 6, 3], 4);
    let c = convert(&net, false).unwrap();
    let run = run_network(&c.snn, &c.schedule, &encode_input(&[0.0; 10]).unwrap(), &SimConfig::default()).unwrap();
    for (l, f) in run.frames.iter().enumerate().skip(1) {
        assert!(decode_spikes(f, l).unwrap().iter().all(|&a| a == 0.0));
    }
    assert!(run.output.iter().all(|&v| v == 0.0));
}

#[test]
fn one_hidden_layer_discrete_within_dt() {
    let net = common::dense_net(&[12, 9, 4], 21);
    let c = convert(&net, false).unwrap();
    let x = common::random_input(12, 5);
    let ann = net.forward(&Tensor::new(vec![12], x.clone()).unwrap(), true).unwrap();
    let cfg = SimConfig::default();
    let run = run_network(&c.snn, &c.schedule, &encode_input(&x).unwrap(), &cfg).unwrap();
    let hidden = decode_spikes(&run.frames[1], 1).unwrap();
    for (a, b) in hidden.iter().zip(ann.activations[1].data()) {
        assert!((a - b).abs() <= cfg.dt() + 1e-12, "{a} vs {b}");
        // round-up convention: decoded values never exceed the analog ones
        assert!(*a <= b + 1e-12);
    }
}
