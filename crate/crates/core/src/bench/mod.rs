//! Experiment harness: synthetic data, backbone pre-training, task
//! sampling, baselines, statistics and the scenario runner that writes CSV
//! and markdown reports.

mod config;
mod data;
mod report;
mod scenario;
pub mod stats;
mod tasks;
mod train;

pub use config::{
    AmpSection, EvalSection, ExperimentConfig, NeighborAblationSection, OverlapSection, PoolSection,
    RatioTransferSection, SimilarityAblationSection, SizeTransferSection, SmspSection, UnseenSection,
};
pub use data::{
    decode_dataset, encode_dataset, generate_synthetic_dataset, load_dataset, normalize_pixel, write_dataset,
    Dataset, DatasetSource, SyntheticConfig, TRAIN_FRACTION,
};
pub use report::{Check, ExperimentReport, OverlapRow, ReportRow, TaskRow};
pub use scenario::{group_neighbors, PoolSet, Workbench, SCENARIOS};
pub use tasks::{sample_tasks, TaskSpec};
pub use train::{
    grid_search_l1, linear_probe, pretrain_backbone, random_retained, run_random_mask_baseline, BaselineOutcome,
    GridPoint, PretrainConfig,
};
