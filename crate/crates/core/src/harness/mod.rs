//! Experiment harness: dataset split, training loop, NMSE / correlation
//! metrics, and the block-kind and shuffle ablations.
//!
//! Everything here is pure given its inputs; reading and writing files is
//! left to [`crate::iocli`].

mod ablation;
mod config;
mod metrics;
mod shuffle;
mod split;
mod train;

pub use ablation::{
    rows_to_csv, run_cmlp_ablation, run_jobs, run_shuffle_ablation, AblationRow, CmlpAblation,
    ModeSummary, ShuffleAblation,
};
pub use config::{toy_scenario, DatasetSource, ExperimentConfig, Precision};
pub use metrics::{nmse, rho, Nmse, TestMetrics, NMSE_DB_FLOOR, NMSE_LINEAR_FLOOR};
pub use shuffle::{
    interlaced_shuffle, non_interlaced_shuffle, Permutation, ShuffleMode, ShufflePlan, ShuffleSpec,
};
pub use split::{split_dataset, SplitRatio};
pub use train::{
    evaluate, model_layout_to_csi, rms_scale, run_fingerprint, train, train_with_plan, EpochRecord,
    MetricsReport, PreparedSet, TrainOutcome,
};

#[cfg(test)]
mod tests;
