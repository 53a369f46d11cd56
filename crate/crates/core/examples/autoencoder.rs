//! Trains the 784-128-64-32-64-128-784 autoencoder with a sigmoid head and
//! reports PSNR / SSIM of the analog network and its spiking conversion.
//!
//! MNIST_DIR=data/mnist cargo run --release --example autoencoder -- [epochs] [test-limit]

use ttfs::convert::convert;
use ttfs::io::{evaluate_network, load_split, train_network, ExperimentConfig, Split, PRESET_AE};
use ttfs::sim::SimConfig;

fn main() -> ttfs::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ExperimentConfig::for_preset(PRESET_AE)?;
    cfg.train.epochs = args.first().copied().unwrap_or(5);
    cfg.eval.limit = Some(args.get(1).copied().unwrap_or(1000));

    let train = load_split(&cfg, Split::Train)?;
    let test = load_split(&cfg, Split::Test)?;
    let (net, _) = train_network(&cfg, &train, None, |_| {})?;
    let conversion = convert(&net, false)?;
    let r = evaluate_network(&net, &conversion, &test, cfg.train.task_loss, &SimConfig::default(), &cfg)?;
    let t = &r.task;
    println!("        PSNR (dB)   SSIM");
    println!("ANN     {:8.2}   {:.4}", t.ann_psnr.unwrap(), t.ann_ssim.unwrap());
    println!("SNN     {:8.2}   {:.4}", t.snn_psnr.unwrap(), t.snn_ssim.unwrap());
    Ok(())
}
