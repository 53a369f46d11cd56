use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttfs::io::{self, ExperimentConfig, Split};
use ttfs::sim::Backend;

#[derive(Parser)]
#[command(name = "ttfs", version, about = "Train, convert and simulate TTFS spiking networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Discrete,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Dynamic,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Architecture preset when no config is given.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps_per_window: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    threshold: Option<ThresholdArg>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Directory holding the MNIST IDX files.
    #[arg(long, env = "MNIST_DIR")]
    data_dir: Option<PathBuf>,
    /// Output directory (the TTFS_OUTPUT_DIR variable takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate at most this many samples.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    no_soft: bool,
    #[arg(long)]
    no_hard: bool,
    #[arg(long)]
    no_relu1: bool,
    #[arg(long)]
    no_norm: bool,
    #[arg(long)]
    no_dynamic: bool,
}

impl Common {
    fn config(&self) -> ttfs::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(p)) => ExperimentConfig::for_preset(p)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(n) = self.steps_per_window {
            cfg.sim.steps_per_window = n;
        }
        if let Some(b) = self.backend {
            cfg.sim.backend = match b {
                BackendArg::Discrete => Backend::Discrete,
                BackendArg::Exact => Backend::Exact,
            };
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(d) = &self.data_dir {
            cfg.data_dir = Some(d.clone());
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if self.limit.is_some() {
            cfg.eval.limit = self.limit;
        }
        let f = &mut cfg.flags;
        f.soft &= !self.no_soft;
        f.hard &= !self.no_hard;
        f.relu1 &= !self.no_relu1;
        f.norm &= !self.no_norm;
        f.dynamic &= !self.no_dynamic;
        match self.threshold {
            Some(ThresholdArg::Fixed) => f.dynamic = false,
            Some(ThresholdArg::Dynamic) => f.dynamic = true,
            None => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a constrained ANN and save a model container.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Audit and convert a saved model.
    Convert {
        model: PathBuf,
        /// Convert even when the audit fails.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run one test sample through the spiking network and dump its spikes.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Paired ANN/SNN evaluation on a dataset split.
    Evaluate {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate every ablation row.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Power proxy of a saved run report.
    PowerProxy {
        report: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        neuron_op_weight: f64,
    },
    /// Export the spike-time histograms of a saved run report.
    ExportHist {
        report: PathBuf,
        #[arg(long, default_value = "histograms.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> ttfs::Result<()> {
    match cli.command {
        Command::Train { common } => {
            let cfg = common.config()?;
            let run = io::cmd_train(&cfg)?;
            println!(
                "model {} ({} epochs, max |sum w - 1| {:.3e}, row {})",
                run.model_path.display(),
                run.outcome.log.len(),
                run.network.max_weight_sum_deviation(),
                cfg.flags.row_label()
            );
            if let Some(v) = run.outcome.log.last().and_then(|s| s.validation) {
                println!("validation {v:.4}");
            }
        }
        Command::Convert { model, force, common } => {
            let cfg = common.config()?;
            let c = io::cmd_convert(&model, force, &cfg.resolved_output_dir())?;
            println!("{} ({} spiking layers)", c.report.summary(), c.snn.depth());
            for w in &c.report.warnings {
                println!("warning: {w}");
            }
        }
        Command::Simulate {
            model,
            sample,
            force,
            common,
        } => {
            let cfg = common.config()?;
            let run = io::cmd_simulate(&model, sample, &cfg, force)?;
            println!("output potentials {:?}", run.output);
            println!("syn_ops {} neuron_ops {}", run.counters.syn_ops, run.counters.neuron_ops);
        }
        Command::Evaluate {
            model,
            split,
            force,
            common,
        } => {
            let cfg = common.config()?;
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Validation => Split::Validation,
                SplitArg::Test => Split::Test,
            };
            let report = io::cmd_evaluate(&model, split, &cfg, force)?;
            println!("{}", serde_json::to_string_pretty(&report.task)?);
            for e in &report.conversion_error {
                println!("layer {} conversion error mean {:.3e} max {:.3e}", e.layer, e.mean, e.max);
            }
            println!("power proxy {:.0}", report.power_proxy);
        }
        Command::Ablate { common } => {
            let cfg = common.config()?;
            let rows = io::cmd_ablate(&cfg)?;
            io::write_ablation_csv(std::io::stdout().lock(), &rows)
                .map_err(|e| ttfs::Error::Io { path: "<stdout>".into(), source: e })?;
        }
        Command::PowerProxy {
            report,
            neuron_op_weight,
        } => println!("{}", io::cmd_power_proxy(&report, neuron_op_weight)?),
        Command::ExportHist { report, out } => {
            io::cmd_export_hist(&report, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

