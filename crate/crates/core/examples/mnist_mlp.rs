//! Trains the 784-300-10 MLP with every constraint enabled, converts it and
//! compares ANN and SNN accuracy on the MNIST test set.
//!
//! MNIST_DIR=data/mnist cargo run --release --example mnist_mlp -- [epochs] [test-limit]

use ttfs::convert::convert;
use ttfs::io::{evaluate_network, load_split, train_network, ExperimentConfig, Split, PRESET_MLP};
use ttfs::sim::SimConfig;

fn main() -> ttfs::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ExperimentConfig::for_preset(PRESET_MLP)?;
    cfg.train.epochs = args.first().copied().unwrap_or(5);
    cfg.eval.limit = args.get(1).copied();

    let train = load_split(&cfg, Split::Train)?;
    let test = load_split(&cfg, Split::Test)?;
    let (net, outcome) = train_network(&cfg, &train, None, |_| {})?;
    println!("trained {} steps, worst weight-sum deviation {:.2e}", outcome.steps, outcome.max_step_deviation);

    let conversion = convert(&net, false)?;
    for sim in [SimConfig::default(), SimConfig::exact()] {
        let r = evaluate_network(&net, &conversion, &test, cfg.train.task_loss, &sim, &cfg)?;
        let (a, s) = (r.task.ann_accuracy.unwrap(), r.task.snn_accuracy.unwrap());
        println!(
            "{:?}: ANN {:.2}%  SNN {:.2}%  delta {:.2} pts  agreement {:.2}%  SynOPs/sample {:.0}",
            sim.backend,
            100.0 * a,
            100.0 * s,
            100.0 * (a - s),
            100.0 * r.task.argmax_agreement.unwrap(),
            r.counters.syn_ops as f64 / r.samples as f64
        );
    }
    Ok(())
}
