use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ann::{Activation, LayerSpec, LrSchedule, TaskLoss, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::NEURON_OP_WEIGHT_RELPSP;
use crate::sim::{Readout, SimConfig, ThresholdMode};
use crate::tensor::Shape2D;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "TTFS_OUTPUT_DIR";

pub const PRESET_MLP: &str = "mlp-784-300-10";
pub const PRESET_AE: &str = "ae-784-128-64-32-64-128-784";
pub const PRESET_CNN: &str = "cnn-small";
pub const PRESETS: [&str; 3] = [PRESET_MLP, PRESET_AE, PRESET_CNN];

/// The five switchable ingredients of the method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    /// Weight-sum loss.
    pub soft: bool,
    /// Weight-sum projection after each step.
    pub hard: bool,
    /// ReLU1 instead of ReLU in hidden layers.
    pub relu1: bool,
    /// Pre-activation normalization loss.
    pub norm: bool,
    /// Dynamic threshold during simulation.
    pub dynamic: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self::ALL
    }
}

impl AblationFlags {
    pub const ALL: Self = Self {
        soft: true,
        hard: true,
        relu1: true,
        norm: true,
        dynamic: true,
    };

    /// Named ablation rows in table order.
    pub fn rows() -> [(&'static str, AblationFlags); 7] {
        let all = Self::ALL;
        [
            ("baseline", all),
            (
                "1",
                Self {
                    soft: false,
                    hard: false,
                    relu1: false,
                    norm: false,
                    dynamic: false,
                },
            ),
            ("2a", Self { hard: false, ..all }),
            (
                "2b",
                Self {
                    soft: false,
                    hard: false,
                    ..all
                },
            ),
            ("3", Self { relu1: false, ..all }),
            ("4", Self { norm: false, ..all }),
            ("5", Self { dynamic: false, ..all }),
        ]
    }

    pub fn row_label(&self) -> &'static str {
        Self::rows()
            .iter()
            .find(|(_, f)| f == self)
            .map_or("custom", |(label, _)| label)
    }

    pub fn from_row(label: &str) -> Option<Self> {
        Self::rows().iter().find(|(l, _)| *l == label).map(|(_, f)| *f)
    }

    pub fn apply_train(&self, cfg: &TrainConfig) -> TrainConfig {
        let mut cfg = cfg.clone();
        if !self.soft {
            cfg.lambda_w = 0.0;
        }
        if !self.norm {
            cfg.lambda_a = 0.0;
        }
        cfg.hard_projection = self.hard;
        cfg
    }

    pub fn apply_sim(&self, cfg: &SimConfig) -> SimConfig {
        let mode = if self.dynamic {
            ThresholdMode::Dynamic
        } else {
            ThresholdMode::Fixed
        };
        cfg.with_threshold(mode)
    }

    pub fn hidden_activation(&self) -> Activation {
        if self.relu1 {
            Activation::Relu1
        } else {
            Activation::Relu
        }
    }
}

impl fmt::Display for AblationFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |b: bool| if b { '+' } else { '-' };
        write!(
            f,
            "{}soft {}hard {}relu1 {}norm {}dynamic",
            mark(self.soft),
            mark(self.hard),
            mark(self.relu1),
            mark(self.norm),
            mark(self.dynamic)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub bins_per_window: usize,
    pub neuron_op_weight: f64,
    /// Evaluate only the first `limit` samples of a split.
    pub limit: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            bins_per_window: 50,
            neuron_op_weight: NEURON_OP_WEIGHT_RELPSP,
            limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub preset: String,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Train on only the first `train_limit` samples.
    pub train_limit: Option<usize>,
    pub train: TrainConfig,
    pub sim: SimConfig,
    pub flags: AblationFlags,
    pub eval: EvalSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_preset(PRESET_MLP).expect("built-in preset")
    }
}

impl ExperimentConfig {
    pub fn for_preset(preset: &str) -> Result<Self> {
        Ok(Self {
            preset: preset.to_string(),
            data_dir: None,
            output_dir: PathBuf::from("runs"),
            train_limit: None,
            train: preset_train_config(preset)?,
            sim: SimConfig::default(),
            flags: AblationFlags::ALL,
            eval: EvalSettings::default(),
        })
    }

    /// Parses TOML on top of the defaults of the preset it names.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        let preset = match user.get("preset") {
            Some(toml::Value::String(p)) => p.clone(),
            Some(_) => return Err(Error::Config("preset must be a string".into())),
            None => PRESET_MLP.to_string(),
        };
        let base = toml::Table::try_from(Self::for_preset(&preset)?).map_err(|e| Error::Toml(e.to_string()))?;
        let merged = merge(base, user);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        preset_layers(&self.preset, Activation::Relu1)?;
        self.train.validate()?;
        self.sim.validate()?;
        if self.eval.bins_per_window == 0 {
            return Err(Error::Config("bins_per_window must be positive".into()));
        }
        Ok(())
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }

    pub fn resolved_data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .unwrap_or_else(|| super::mnist::default_mnist_dir(Path::new(".")))
    }

    pub fn effective_train(&self) -> TrainConfig {
        self.flags.apply_train(&self.train)
    }

    pub fn effective_sim(&self) -> SimConfig {
        self.flags.apply_sim(&self.sim)
    }

    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        preset_layers(&self.preset, self.flags.hidden_activation())
    }

    pub fn readout(&self) -> Readout {
        match self.train.task_loss {
            TaskLoss::CrossEntropy => Readout::Logits,
            TaskLoss::MeanSquaredError => Readout::Sigmoid,
        }
    }
}

fn merge(mut base: toml::Table, user: toml::Table) -> toml::Table {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => {
                *b = merge(std::mem::take(b), u);
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

pub fn preset_layers(preset: &str, hidden: Activation) -> Result<Vec<LayerSpec>> {
    let dense = |i, o| LayerSpec::dense(i, o, hidden);
    Ok(match preset {
        PRESET_MLP => vec![dense(784, 300), LayerSpec::dense(300, 10, Activation::None)],
        PRESET_AE => vec![
            dense(784, 128),
            dense(128, 64),
            dense(64, 32),
            dense(32, 64),
            dense(64, 128),
            LayerSpec::dense(128, 784, Activation::None),
        ],
        PRESET_CNN => {
            let conv = |input, out_channels| LayerSpec::Conv2d {
                input,
                out_channels,
                kernel: 5,
                stride: 1,
                padding: 2,
                activation: hidden,
            };
            let s1 = Shape2D::new(1, 28, 28)?;
            let s2 = Shape2D::new(6, 28, 28)?;
            let s3 = Shape2D::new(6, 14, 14)?;
            let s4 = Shape2D::new(12, 14, 14)?;
            let s5 = Shape2D::new(12, 7, 7)?;
            vec![
                conv(s1, 6),
                LayerSpec::AvgPool { input: s2, window: 2 },
                conv(s3, 12),
                LayerSpec::AvgPool { input: s4, window: 2 },
                LayerSpec::Flatten { input: s5 },
                LayerSpec::dense(s5.len(), 10, Activation::None),
            ]
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESETS.join(", ")
            )))
        }
    })
}

pub fn preset_train_config(preset: &str) -> Result<TrainConfig> {
    let base = TrainConfig::default();
    Ok(match preset {
        PRESET_MLP | PRESET_CNN => base,
        PRESET_AE => TrainConfig {
            task_loss: TaskLoss::MeanSquaredError,
            schedule: LrSchedule::Cosine,
            learning_rate: 0.001,
            lambda_a: 3.0,
            ..base
        },
        other => return Err(Error::Config(format!("unknown preset {other:?}"))),
    })
}
