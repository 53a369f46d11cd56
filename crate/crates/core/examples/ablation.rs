//! Trains the MLP once per ablation row and prints ANN/SNN accuracy, the
//! gap between them, and the fraction of spikes outside their window.
//!
//! MNIST_DIR=data/mnist cargo run --release --example ablation -- [epochs] [test-limit]

use ttfs::io::{load_split, run_ablation, write_ablation_csv, ExperimentConfig, Split, PRESET_MLP};

fn main() -> ttfs::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ExperimentConfig::for_preset(PRESET_MLP)?;
    cfg.train.epochs = args.first().copied().unwrap_or(3);
    cfg.eval.limit = Some(args.get(1).copied().unwrap_or(2000));

    let train = load_split(&cfg, Split::Train)?;
    let test = load_split(&cfg, Split::Test)?;
    let rows = run_ablation(&cfg, &train, &test)?;
    println!("{:<9} {:<40} {:>7} {:>7} {:>7} {:>8}", "row", "flags", "ANN %", "SNN %", "delta", "out-win");
    for r in &rows {
        println!(
            "{:<9} {:<40} {:>7.2} {:>7.2} {:>7.2} {:>8.4}",
            r.label,
            r.flags.to_string(),
            100.0 * r.ann_accuracy,
            100.0 * r.snn_accuracy,
            r.delta,
            r.out_of_window_fraction
        );
    }
    write_ablation_csv(std::io::stderr().lock(), &rows).ok();
    Ok(())
}
