//! The train / convert / simulate / evaluate / ablate workflows.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{AblationFlags, ExperimentConfig};
use super::container::{load_model, save_model, ModelMeta};
use super::mnist::{Dataset, DatasetHandle, Split};
use crate::ann::{sigmoid, train, EpochStats, Network, TaskLoss, Targets, TrainData, TrainOutcome};
use crate::convert::{convert, encode_input, Conversion, ConvertReport};
use crate::error::{Error, Result};
use crate::metrics::{
    argmax, evaluate_pair, power_proxy, psnr, write_histogram_csv, EvalOptions, EvalTask, RunReport,
};
use crate::sim::{run_network, write_spike_trace, NetworkRun, SimConfig};
use crate::tensor::Tensor;

pub const MODEL_FILE: &str = "model.ttfs";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CONVERT_REPORT_FILE: &str = "convert_report.json";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const RUN_REPORT_FILE: &str = "run_report.json";
pub const TRACE_FILE: &str = "spike_trace.csv";
pub const HISTOGRAM_FILE: &str = "histograms.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

/// Analog accuracy (classification) or mean PSNR (reconstruction) on the
/// first `limit` samples.
pub fn ann_score(net: &Network, data: &Dataset, task_loss: TaskLoss, limit: Option<usize>) -> Result<f64> {
    let n = limit.map_or(data.len(), |l| l.min(data.len()));
    let len = data.sample_len();
    let mut score = 0.0;
    for start in (0..n).step_by(500) {
        let end = (start + 500).min(n);
        let x = Tensor::new(vec![end - start, len], data.images[start * len..end * len].to_vec())?;
        let out = net.forward(&x, false)?.output;
        let width = out.shape()[1];
        for (i, row) in out.data().chunks(width).enumerate() {
            score += match task_loss {
                TaskLoss::CrossEntropy => f64::from(u8::from(argmax(row) == data.labels[start + i])),
                TaskLoss::MeanSquaredError => {
                    let y: Vec<f64> = row.iter().map(|&v| sigmoid(v)).collect();
                    psnr(data.image(start + i), &y, 1.0)?
                },
            };
        }
    }
    Ok(score / n.max(1) as f64)
}

fn log_header() -> &'static str {
    "epoch,lr,task_loss,weight_sum_loss,preact_loss,max_weight_sum_deviation,preact_mean,preact_std,validation"
}

fn log_row(s: &EpochStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        s.epoch,
        s.lr,
        s.task_loss,
        s.weight_sum_loss,
        s.preact_loss,
        s.max_step_deviation,
        s.preact_mean,
        s.preact_std,
        s.validation.map_or(String::new(), |v| v.to_string())
    )
}

/// Builds the configured network and trains it on `train_set`, scoring
/// `validation` after every epoch. `on_epoch` sees the finished stats.
pub fn train_network(
    cfg: &ExperimentConfig,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Network, TrainOutcome)> {
    let tc = cfg.effective_train();
    let mut net = Network::initialized(cfg.layers()?, tc.seed)?;
    let data = TrainData {
        inputs: &train_set.images,
        sample_len: train_set.sample_len(),
        targets: match tc.task_loss {
            TaskLoss::CrossEntropy => Targets::Labels(&train_set.labels),
            TaskLoss::MeanSquaredError => Targets::Reconstruction,
        },
    };
    let mut failure = None;
    let outcome = train(&mut net, &data, &tc, |net, stats| {
        if let Some(v) = validation {
            match ann_score(net, v, tc.task_loss, cfg.eval.limit) {
                Ok(score) => stats.validation = Some(score),
                Err(e) => failure = Some(e),
            }
        }
        info!(
            "epoch {} task {:.4} L_W {:.2e} L_A {:.4} validation {:?}",
            stats.epoch, stats.task_loss, stats.weight_sum_loss, stats.preact_loss, stats.validation
        );
        on_epoch(stats);
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok((net, outcome)),
    }
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub network: Network,
    pub outcome: TrainOutcome,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
}

pub fn load_split(cfg: &ExperimentConfig, split: Split) -> Result<Dataset> {
    DatasetHandle::new(cfg.resolved_data_dir(), split).load()
}

/// Trains, appending one log row per epoch, and saves the model container.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let out = cfg.resolved_output_dir();
    create_dir(&out)?;
    let mut train_set = load_split(cfg, Split::Train)?;
    if let Some(n) = cfg.train_limit {
        train_set = train_set.truncated(n);
    }
    let validation = load_split(cfg, Split::Validation)?;

    let log_path = out.join(TRAIN_LOG_FILE);
    std::fs::write(&log_path, format!("{}\n", log_header())).map_err(|e| Error::io(&log_path, e))?;
    let mut log = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    let mut log_error = None;
    let (network, outcome) = train_network(cfg, &train_set, Some(&validation), |stats| {
        if let Err(e) = writeln!(log, "{}", log_row(stats)) {
            log_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_error {
        return Err(Error::io(&log_path, e));
    }

    let model_path = out.join(MODEL_FILE);
    let meta = ModelMeta {
        train_config: Some(cfg.effective_train()),
        seed: cfg.train.seed,
        preset: Some(cfg.preset.clone()),
        flags: Some(cfg.flags),
    };
    save_model(&model_path, &network, &meta)?;
    info!(
        "saved {} (max weight-sum deviation {:.3e})",
        model_path.display(),
        network.max_weight_sum_deviation()
    );
    Ok(TrainRun {
        network,
        outcome,
        model_path,
        log_path,
    })
}

/// Converts a saved model, writing the schedule and the audit report. The
/// report is written even when conversion is refused.
pub fn cmd_convert(model: &Path, force: bool, out: &Path) -> Result<Conversion> {
    create_dir(out)?;
    let loaded = load_model(model)?;
    match convert(&loaded.network, force) {
        Ok(c) => {
            write_json(&out.join(CONVERT_REPORT_FILE), &c.report)?;
            write_json(&out.join(SCHEDULE_FILE), &c.schedule)?;
            Ok(c)
        }
        Err(Error::ConversionRefused(report)) => {
            write_json(&out.join(CONVERT_REPORT_FILE), &*report)?;
            Err(Error::ConversionRefused(report))
        }
        Err(e) => Err(e),
    }
}

fn eval_task<'a>(task_loss: TaskLoss, data: &'a Dataset) -> EvalTask<'a> {
    match task_loss {
        TaskLoss::CrossEntropy => EvalTask::Classification(&data.labels),
        TaskLoss::MeanSquaredError => EvalTask::Reconstruction {
            height: data.height,
            width: data.width,
        },
    }
}

fn eval_options(cfg: &ExperimentConfig) -> EvalOptions {
    EvalOptions {
        bins_per_window: cfg.eval.bins_per_window,
        neuron_op_weight: cfg.eval.neuron_op_weight,
        limit: cfg.eval.limit,
    }
}

/// Paired analog/spiking inference of `net` on `data`.
pub fn evaluate_network(
    net: &Network,
    conversion: &Conversion,
    data: &Dataset,
    task_loss: TaskLoss,
    sim: &SimConfig,
    cfg: &ExperimentConfig,
) -> Result<RunReport> {
    evaluate_pair(net, conversion, &data.images, eval_task(task_loss, data), sim, &eval_options(cfg))
}

/// Evaluates a saved model on a dataset split and writes the run report.
pub fn cmd_evaluate(model: &Path, split: Split, cfg: &ExperimentConfig, force: bool) -> Result<RunReport> {
    let out = cfg.resolved_output_dir();
    create_dir(&out)?;
    let loaded = load_model(model)?;
    let conversion = convert(&loaded.network, force)?;
    let task_loss = loaded
        .header
        .train_config
        .as_ref()
        .map_or(cfg.train.task_loss, |t| t.task_loss);
    let data = load_split(cfg, split)?;
    let report = evaluate_network(&loaded.network, &conversion, &data, task_loss, &cfg.effective_sim(), cfg)?;
    report.write_json(&out.join(RUN_REPORT_FILE))?;
    Ok(report)
}

/// Runs one test sample through the spiking network and dumps its spikes.
pub fn cmd_simulate(model: &Path, sample: usize, cfg: &ExperimentConfig, force: bool) -> Result<NetworkRun> {
    let out = cfg.resolved_output_dir();
    create_dir(&out)?;
    let loaded = load_model(model)?;
    let conversion = convert(&loaded.network, force)?;
    let data = load_split(cfg, Split::Test)?;
    if sample >= data.len() {
        return Err(Error::Config(format!("sample {sample} out of range ({} samples)", data.len())));
    }
    let run = run_network(
        &conversion.snn,
        &conversion.schedule,
        &encode_input(data.image(sample))?,
        &cfg.effective_sim(),
    )?;
    let path = out.join(TRACE_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_spike_trace(BufWriter::new(file), &run.frames).map_err(|e| Error::io(&path, e))?;
    Ok(run)
}

/// `P = syn_ops + weight · neuron_ops` of a saved run report.
pub fn cmd_power_proxy(report: &Path, neuron_op_weight: f64) -> Result<f64> {
    power_proxy(RunReport::read_json(report)?.counters, neuron_op_weight)
}

/// Writes the histograms of a saved run report as delimited text.
pub fn cmd_export_hist(report: &Path, out: &Path) -> Result<()> {
    let report = RunReport::read_json(report)?;
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    write_histogram_csv(BufWriter::new(file), &report.histograms).map_err(|e| Error::io(out, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub flags: AblationFlags,
    pub ann_accuracy: f64,
    pub snn_accuracy: f64,
    /// `ann_accuracy − snn_accuracy` in percentage points.
    pub delta: f64,
    pub out_of_window_fraction: f64,
    pub convertible: bool,
    pub max_weight_sum_deviation: f64,
}

/// Converts (forcing past a failed audit) and evaluates one trained ablation
/// variant.
pub fn ablation_row(
    cfg: &ExperimentConfig,
    flags: AblationFlags,
    net: &Network,
    test: &Dataset,
) -> Result<(AblationRow, RunReport)> {
    let conversion = convert(net, true)?;
    let sim = flags.apply_sim(&cfg.sim);
    let report = evaluate_network(net, &conversion, test, TaskLoss::CrossEntropy, &sim, cfg)?;
    let (ann, snn) = (
        report.task.ann_accuracy.unwrap_or(0.0),
        report.task.snn_accuracy.unwrap_or(0.0),
    );
    Ok((
        AblationRow {
            label: flags.row_label().to_string(),
            flags,
            ann_accuracy: ann,
            snn_accuracy: snn,
            delta: 100.0 * (ann - snn),
            out_of_window_fraction: report.out_of_window_fraction,
            convertible: !conversion.report.forced,
            max_weight_sum_deviation: conversion.report.max_deviation(),
        },
        report,
    ))
}

/// Trains and evaluates every ablation row. Rows that differ only in the
/// simulation flag share one trained network.
pub fn run_ablation(cfg: &ExperimentConfig, train_set: &Dataset, test: &Dataset) -> Result<Vec<AblationRow>> {
    let mut trained: Vec<(AblationFlags, Network)> = Vec::new();
    let mut rows = Vec::new();
    for (label, flags) in AblationFlags::rows() {
        let key = AblationFlags { dynamic: true, ..flags };
        let net = match trained.iter().find(|(k, _)| *k == key) {
            Some((_, n)) => n.clone(),
            None => {
                info!("ablation row {label}: training with {flags}");
                let row_cfg = ExperimentConfig { flags, ..cfg.clone() };
                let (n, _) = train_network(&row_cfg, train_set, None, |_| {})?;
                trained.push((key, n.clone()));
                n
            }
        };
        let (row, _) = ablation_row(cfg, flags, &net, test)?;
        info!(
            "row {label}: ANN {:.2}% SNN {:.2}% delta {:.2}",
            100.0 * row.ann_accuracy,
            100.0 * row.snn_accuracy,
            row.delta
        );
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_ablation_csv<W: Write>(mut out: W, rows: &[AblationRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "row,soft,hard,relu1,norm,dynamic,ann_accuracy,snn_accuracy,delta,out_of_window_fraction,convertible"
    )?;
    for r in rows {
        let f = r.flags;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.label, f.soft, f.hard, f.relu1, f.norm, f.dynamic, r.ann_accuracy, r.snn_accuracy, r.delta,
            r.out_of_window_fraction, r.convertible
        )?;
    }
    Ok(())
}

/// Full ablation on MNIST; writes a CSV and a JSON table.
pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let out = cfg.resolved_output_dir();
    create_dir(&out)?;
    let mut train_set = load_split(cfg, Split::Train)?;
    if let Some(n) = cfg.train_limit {
        train_set = train_set.truncated(n);
    }
    let test = load_split(cfg, Split::Test)?;
    let rows = run_ablation(cfg, &train_set, &test)?;
    let path = out.join(ABLATION_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_ablation_csv(BufWriter::new(file), &rows).map_err(|e| Error::io(&path, e))?;
    write_json(&out.join("ablation.json"), &rows)?;
    Ok(rows)
}

/// Reads a convert report written by [`cmd_convert`].
pub fn read_convert_report(path: &Path) -> Result<ConvertReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
