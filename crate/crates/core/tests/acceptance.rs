//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 4 to 6 need MNIST (`MNIST_DIR`, or `data/mnist` at the workspace
//! root); without it they are reported as SKIP. A failing criterion only
//! turns into a nonzero exit status when `ACCEPTANCE_STRICT` is set.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ttfs::ann::{evaluate_objective, project_weight_sums, Activation, LayerSpec, Network, TaskLoss, Targets, TrainConfig};
use ttfs::convert::{convert, decode_spikes, encode_input, Connectivity, SpikingLayer, ThresholdSchedule};
use ttfs::io::{ablation_row, evaluate_network, load_split, train_network, AblationFlags, Dataset, ExperimentConfig, Split, PRESET_AE, PRESET_MLP};
use ttfs::metrics::power_proxy;
use ttfs::sim::{run_network, simulate_layer, solve_spike_exact, SimConfig, ThresholdMode};
use ttfs::tensor::Tensor;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> (bool, String) {
    (elapsed.as_secs() <= limit_secs, format!("{:.1}s of {limit_secs}s", elapsed.as_secs_f64()))
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn lossless_identity() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let net = common::random_dense_net(seed);
        let c = convert(&net, false).expect("projected nets convert");
        let x = common::random_input(net.input_len(), seed + 1000);
        let ann = net.forward(&Tensor::new(vec![x.len()], x.clone()).unwrap(), true).unwrap();
        let run = run_network(&c.snn, &c.schedule, &encode_input(&x).unwrap(), &SimConfig::exact()).unwrap();
        for (l, f) in run.frames.iter().enumerate().skip(1) {
            worst = worst.max(max_abs(&decode_spikes(f, l).unwrap(), ann.activations[l].data()));
        }
        worst = worst.max(max_abs(&run.output, ann.output.data()));
    }
    let (fast, t) = within(start.elapsed(), 60);
    verdict(worst <= 1e-12 && fast, format!("100 nets, max per-layer error {worst:.3e} (<= 1e-12), {t}"))
}

/// Largest per-neuron discrete/exact spike-time gap, each layer fed the
/// exact frame of the layer before.
fn max_gap(steps: usize, nets: &[Network]) -> f64 {
    let cfg = SimConfig::discrete(steps);
    let mut worst: f64 = 0.0;
    for (i, net) in nets.iter().enumerate() {
        let c = convert(net, false).unwrap();
        let mut frame = encode_input(&common::random_input(net.input_len(), 500 + i as u64)).unwrap();
        for layer in c.snn.layers.iter().filter(|l| !l.readout) {
            let exact = simulate_layer(layer, &frame, &c.schedule, &SimConfig::exact(), false).unwrap();
            let disc = simulate_layer(layer, &frame, &c.schedule, &cfg, false).unwrap();
            for (a, b) in exact.frame.times.iter().zip(&disc.frame.times) {
                worst = worst.max((a.unwrap() - b.unwrap()).abs());
            }
            frame = exact.frame;
        }
    }
    worst
}

fn quantization_bound() -> Verdict {
    let start = Instant::now();
    let nets: Vec<Network> = (0..100).map(common::random_dense_net).collect();
    let g50 = max_gap(50, &nets);
    let g200 = max_gap(200, &nets);
    let dt = SimConfig::discrete(50).dt();
    let (fast, t) = within(start.elapsed(), 120);
    verdict(
        g50 <= dt * (1.0 + 1e-9) && g200 <= dt / 4.0 * (1.0 + 1e-9) && g50 >= 2.0 * g200 && fast,
        format!("max gap {g50:.5} at dt=0.02, {g200:.5} at dt=0.005, reduction {:.2}x (>= 2x), {t}", g50 / g200),
    )
}

fn premature_spike() -> Verdict {
    let layer = SpikingLayer {
        index: 1,
        connectivity: Connectivity::Dense {
            inputs: 2,
            outputs: 1,
            weights: Tensor::from_rows(&[&[5.0, -10.0]]),
        },
        readout: false,
    };
    let schedule = ThresholdSchedule::new(2);
    let input = encode_input(&[0.8, 0.4]).unwrap();
    let fixed_cfg = SimConfig::default().with_threshold(ThresholdMode::Fixed);
    let fixed_discrete = simulate_layer(&layer, &input, &schedule, &fixed_cfg, false).unwrap().frame.times[0];
    let fixed_exact = solve_spike_exact(&[0.2, 0.6], &[5.0, -10.0], 1.0, (1.0, 2.0), ThresholdMode::Fixed).unwrap();

    let mut decoded = Vec::new();
    for cfg in [SimConfig::default(), SimConfig::exact()] {
        let f = simulate_layer(&layer, &input, &schedule, &cfg, false).unwrap().frame;
        decoded.push(decode_spikes(&f, 1).unwrap()[0]);
    }
    let ann = Network::with_weights(
        vec![LayerSpec::dense(2, 1, Activation::Relu1), LayerSpec::dense(1, 1, Activation::None)],
        vec![Tensor::from_rows(&[&[5.0, -10.0]]), Tensor::from_rows(&[&[1.0]])],
    )
    .unwrap()
    .forward(&Tensor::new(vec![2], vec![0.8, 0.4]).unwrap(), true)
    .unwrap();
    let a_ann = ann.activations[1].data()[0];
    verdict(
        fixed_discrete == Some(0.4) && fixed_exact == Some(0.4) && decoded.iter().all(|&a| a == 0.0) && a_ann == 0.0,
        format!(
            "fixed mode t_C = {fixed_discrete:?} (discrete), {fixed_exact:?} (exact); dynamic decodes to {decoded:?}, ANN {a_ann}"
        ),
    )
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

struct Mnist {
    train: Dataset,
    test: Dataset,
}

fn load_mnist(cfg: &ExperimentConfig) -> Option<Mnist> {
    Some(Mnist {
        train: load_split(cfg, Split::Train).ok()?,
        test: load_split(cfg, Split::Test).ok()?,
    })
}

struct Baseline {
    net: Network,
    max_step_deviation: f64,
    delta: f64,
}

fn mnist_classification(cfg: &ExperimentConfig, data: &Mnist) -> (Verdict, Baseline) {
    let start = Instant::now();
    let (net, outcome) = train_network(cfg, &data.train, None, |_| {}).unwrap();
    let c = convert(&net, false).unwrap();
    let r = evaluate_network(&net, &c, &data.test, TaskLoss::CrossEntropy, &SimConfig::default(), cfg).unwrap();
    let (ann, snn, agree) = (
        r.task.ann_accuracy.unwrap(),
        r.task.snn_accuracy.unwrap(),
        r.task.argmax_agreement.unwrap(),
    );
    let delta = 100.0 * (ann - snn);
    let (fast, t) = within(start.elapsed(), 30 * 60);
    (
        verdict(
            ann >= 0.97 && delta.abs() <= 0.5 && agree >= 0.99 && fast,
            format!(
                "ANN {:.2}% (>= 97), SNN {:.2}%, |delta| {:.2} pts (<= 0.5), agreement {:.2}% (>= 99), {t}",
                100.0 * ann,
                100.0 * snn,
                delta.abs(),
                100.0 * agree
            ),
        ),
        Baseline {
            net,
            max_step_deviation: outcome.max_step_deviation,
            delta,
        },
    )
}

fn autoencoder(data: &Mnist) -> Verdict {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::for_preset(PRESET_AE).unwrap();
    cfg.data_dir = Some(mnist_dir());
    let (net, _) = train_network(&cfg, &data.train, None, |_| {}).unwrap();
    let c = convert(&net, false).unwrap();
    let r = evaluate_network(&net, &c, &data.test, TaskLoss::MeanSquaredError, &SimConfig::default(), &cfg).unwrap();
    let t = &r.task;
    let (ap, sp, a_s, s_s) = (t.ann_psnr.unwrap(), t.snn_psnr.unwrap(), t.ann_ssim.unwrap(), t.snn_ssim.unwrap());
    let (fast, tm) = within(start.elapsed(), 45 * 60);
    verdict(
        (ap - sp).abs() <= 0.2 && (a_s - s_s).abs() <= 0.01 && fast,
        format!(
            "PSNR ANN {ap:.2} / SNN {sp:.2} dB (gap {:.3} <= 0.2), SSIM ANN {a_s:.4} / SNN {s_s:.4} (gap {:.4} <= 0.01), {tm}",
            (ap - sp).abs(),
            (a_s - s_s).abs()
        ),
    )
}

fn ablation(cfg: &ExperimentConfig, data: &Mnist, base: &Baseline) -> Verdict {
    let start = Instant::now();
    let mut rows = Vec::new();
    for label in ["1", "2a", "2b", "5"] {
        let flags = AblationFlags::from_row(label).unwrap();
        let net = if label == "5" {
            base.net.clone()
        } else {
            let row_cfg = ExperimentConfig { flags, ..cfg.clone() };
            train_network(&row_cfg, &data.train, None, |_| {}).unwrap().0
        };
        rows.push(ablation_row(cfg, flags, &net, &data.test).unwrap().0);
    }
    let [r1, r2a, r2b, r5] = [&rows[0], &rows[1], &rows[2], &rows[3]];
    let b = base.delta.abs();
    let (a, bb, c) = (r2a.delta.abs() - b, r2b.delta.abs() - b, r5.delta.abs() - b);
    let ok = a >= 2.0 && bb >= 20.0 && c >= 5.0 && r5.out_of_window_fraction > 0.0 && r1.snn_accuracy <= 0.2;
    verdict(
        ok,
        format!(
            "baseline |d| {b:.2}; 2a +{a:.2} (>= 2), 2b +{bb:.2} (>= 20), 5 +{c:.2} (>= 5) with out-of-window {:.4}; row 1 SNN {:.2}% (<= 20), {:.0}s",
            r5.out_of_window_fraction,
            100.0 * r1.snn_accuracy,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn feasibility(base: Option<&Baseline>) -> Verdict {
    let mut worst_idempotence = 0usize;
    let mut nets: Vec<Network> = (0..20).map(|s| common::random_dense_net(s + 7000)).collect();
    nets.extend(base.map(|b| b.net.clone()));
    for net in &nets {
        let mut twice = net.clone();
        project_weight_sums(&mut twice);
        let changed = twice
            .weights()
            .iter()
            .zip(net.weights())
            .map(|(a, b)| a.data().iter().zip(b.data()).filter(|(x, y)| x.to_bits() != y.to_bits()).count())
            .sum::<usize>();
        worst_idempotence = worst_idempotence.max(changed);
    }
    // short run on synthetic data so the check is independent of MNIST
    let net0 = common::dense_net(&[20, 16, 4], 3);
    let mut net = Network::initialized(net0.layers().to_vec(), 3).unwrap();
    let x = common::random_input(20 * 256, 4);
    let labels: Vec<usize> = (0..256).map(|i| i % 4).collect();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let data = ttfs::ann::TrainData {
        inputs: &x,
        sample_len: 20,
        targets: Targets::Labels(&labels),
    };
    let outcome = ttfs::ann::train(&mut net, &data, &cfg, |_, _| {}).unwrap();
    let mut worst = outcome.max_step_deviation;
    let mut detail = format!("synthetic run {} steps max |sum w - 1| {:.2e}", outcome.steps, outcome.max_step_deviation);
    if let Some(b) = base {
        worst = worst.max(b.max_step_deviation);
        detail += &format!(", MNIST MLP {:.2e}", b.max_step_deviation);
    }
    verdict(
        worst <= 1e-12 && worst_idempotence == 0,
        format!("{detail} (<= 1e-12); re-projection changed {worst_idempotence} weights"),
    )
}

fn gradient_checks() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let cases: Vec<(Network, Tensor, Option<Vec<usize>>, TaskLoss)> = vec![
        (
            perturb(common::dense_net(&[10, 7, 5, 3], 1)),
            Tensor::new(vec![4, 10], common::random_input(40, 3)).unwrap(),
            Some(vec![0, 2, 1, 2]),
            TaskLoss::CrossEntropy,
        ),
        (
            perturb(common::dense_net(&[8, 5, 3, 5, 8], 4)),
            Tensor::new(vec![3, 8], common::random_input(24, 6)).unwrap(),
            None,
            TaskLoss::MeanSquaredError,
        ),
        (
            perturb(common::conv_net(7)),
            Tensor::new(vec![2, 64], common::random_input(128, 9)).unwrap(),
            Some(vec![3, 1]),
            TaskLoss::CrossEntropy,
        ),
    ];
    for (net, x, labels, task_loss) in &cases {
        let cfg = TrainConfig {
            lambda_w: 0.1,
            lambda_a: 0.5,
            task_loss: *task_loss,
            ..TrainConfig::default()
        };
        let targets = labels.as_deref().map_or(Targets::Reconstruction, Targets::Labels);
        let obj = evaluate_objective(net, x, targets, &cfg, None).unwrap();
        let fixed = obj.preact_targets.clone();
        let f = |n: &Network| evaluate_objective(n, x, targets, &cfg, Some(&fixed)).unwrap().terms.total(&cfg);
        for (li, g) in obj.grads.iter().enumerate() {
            for idx in (0..g.len()).step_by((g.len() / 20).max(1)) {
                let eps = 1e-6;
                let (mut p, mut m) = (net.clone(), net.clone());
                p.weights_mut()[li].data_mut()[idx] += eps;
                m.weights_mut()[li].data_mut()[idx] -= eps;
                let numeric = (f(&p) - f(&m)) / (2.0 * eps);
                let analytic = g.data()[idx];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
                worst = worst.max(rel);
                count += 1;
            }
        }
    }
    verdict(worst < 1e-4, format!("{count} weights across dense/conv/pool nets, worst relative error {worst:.2e} (< 1e-4)"))
}

fn perturb(mut net: Network) -> Network {
    for (i, w) in net.weights_mut().iter_mut().enumerate() {
        for (j, v) in w.data_mut().iter_mut().enumerate() {
            *v += 0.3 * (((i * 131 + j * 17) % 23) as f64 / 11.0 - 1.0);
        }
    }
    net
}

fn power_counting() -> Verdict {
    // 2 inputs -> 2 hidden -> 1 readout neuron
    let net = Network::with_weights(
        vec![LayerSpec::dense(2, 2, Activation::Relu1), LayerSpec::dense(2, 1, Activation::None)],
        vec![Tensor::from_rows(&[&[0.6, 0.4], &[1.25, -0.25]]), Tensor::from_rows(&[&[0.5, 0.5]])],
    )
    .unwrap();
    let c = convert(&net, false).unwrap();
    let input = encode_input(&[0.8, 0.4]).unwrap();
    let disc = run_network(&c.snn, &c.schedule, &input, &SimConfig::default()).unwrap();
    let exact = run_network(&c.snn, &c.schedule, &input, &SimConfig::exact()).unwrap();
    // 2 input spikes x 2 targets + 2 hidden spikes x 1 target
    let syn = 2 * 2 + 2;
    // 3 neurons x 50 steps; exact: two distinct input times per neuron
    let (neu_disc, neu_exact) = (3 * 50, 3 * 2);
    let counts_ok = disc.counters.syn_ops == syn
        && exact.counters.syn_ops == syn
        && disc.counters.neuron_ops == neu_disc
        && exact.counters.neuron_ops == neu_exact;
    let ws = [0.0, 1.0, 2.5, 10.0];
    let p: Vec<f64> = ws.iter().map(|&w| power_proxy(disc.counters, w).unwrap()).collect();
    let linear = ws
        .iter()
        .zip(&p)
        .all(|(&w, &pw)| pw == syn as f64 + w * neu_disc as f64)
        && (p[3] - p[1]) == 9.0 * (p[1] - p[0]);
    verdict(
        counts_ok && linear,
        format!(
            "discrete {}/{} exact {}/{} SynOPs/NeuronOPs (expected {syn}/{neu_disc} and {syn}/{neu_exact}); P(w) = {p:?}",
            disc.counters.syn_ops, disc.counters.neuron_ops, exact.counters.syn_ops, exact.counters.neuron_ops
        ),
    )
}

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let mut failures = 0;
    let mut report = |id: &str, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{id}] {name}: {detail}");
    };

    report("1", "lossless identity", lossless_identity());
    report("2", "quantization bound", quantization_bound());
    report("3", "premature spike construction", premature_spike());

    let mut cfg = ExperimentConfig::for_preset(PRESET_MLP).unwrap();
    cfg.data_dir = Some(mnist_dir());
    let mnist = load_mnist(&cfg);
    let mut baseline = None;
    match &mnist {
        Some(data) => {
            let (v, b) = mnist_classification(&cfg, data);
            report("4", "MNIST classification gap", v);
            report("5", "autoencoder reconstruction gap", autoencoder(data));
            report("6", "ablation directionality", ablation(&cfg, data, &b));
            baseline = Some(b);
        }
        None => {
            let why = format!("MNIST not found under {}", mnist_dir().display());
            report("4", "MNIST classification gap", Verdict::Skip(why.clone()));
            report("5", "autoencoder reconstruction gap", Verdict::Skip(why.clone()));
            report("6", "ablation directionality", Verdict::Skip(why));
        }
    }
    report("7", "feasibility and idempotent projection", feasibility(baseline.as_ref()));
    report("8", "finite-difference gradients", gradient_checks());
    report("9", "power proxy counting", power_counting());

    if failures == 0 {
        println!("all criteria passed");
        return ExitCode::SUCCESS;
    }
    println!("{failures} criterion(s) failed");
    if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
