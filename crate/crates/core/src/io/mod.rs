//! Data ingestion, model persistence, experiment configuration and the
//! command workflows behind the `ttfs` binary.

mod commands;
mod config;
mod container;
mod idx;
mod mnist;

pub use commands::{
    ablation_row, ann_score, cmd_ablate, cmd_convert, cmd_evaluate, cmd_export_hist, cmd_power_proxy,
    cmd_simulate, cmd_train, evaluate_network, load_split, read_convert_report, run_ablation, train_network,
    write_ablation_csv, AblationRow, TrainRun, ABLATION_FILE, CONVERT_REPORT_FILE, HISTOGRAM_FILE, MODEL_FILE,
    RUN_REPORT_FILE, SCHEDULE_FILE, TRACE_FILE, TRAIN_LOG_FILE,
};
pub use config::{
    preset_layers, preset_train_config, AblationFlags, EvalSettings, ExperimentConfig, OUTPUT_DIR_ENV, PRESETS,
    PRESET_AE, PRESET_CNN, PRESET_MLP,
};
pub use container::{
    decode_model, encode_model, load_model, save_model, LoadedModel, ModelHeader, ModelMeta, FORMAT_VERSION, MAGIC,
};
pub use idx::{encode_idx, load_idx, load_labels, parse_idx, IdxData, IDX_IMAGES, IDX_LABELS};
pub use mnist::{default_mnist_dir, Dataset, DatasetHandle, Split, VALIDATION_SIZE};
