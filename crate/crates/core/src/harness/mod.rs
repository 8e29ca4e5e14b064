//! Experiment configuration, task data, run matrices and reports.

mod config;
mod data;
mod idx;
mod report;
mod run;

pub use config::{
    ExperimentConfig, ModelConfig, OptimizerConfig, PerturbConfig, PruningConfig, RunConfig,
    TaskConfig, TaskKind, TransplantConfig, OUTPUT_ROOT_ENV,
};
pub use data::{
    gen_synthetic_task, load_task, load_task_file, save_task_file, TaskSplit, TASK_MAGIC,
};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use report::{
    accuracy_plot_data, analyze_runs, collect_metrics, summarize, summary_csv, t_interval,
    write_report, Interval, SignSummary, SummaryRow,
};
pub use run::{load_transplant, run_dir, run_matrix};
