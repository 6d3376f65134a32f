//! Synthetic data, experiment configuration, runs, sweeps, weight curves
//! and the self-verification report.

mod config;
mod curves;
mod dataset;
mod experiment;
mod sweep;
mod verify;

pub use config::{EffectiveSeeds, ExperimentConfig, ModelSpec, OUTPUT_ROOT_ENV};
pub use curves::{curve_grid, curves_csv, MIN_RESOLUTION};
pub use dataset::{make_dataset, CleanData, DatasetKind, DatasetSpec, NoisyDataset};
pub use experiment::{
    build_dataset, metrics_csv, run_experiment, run_in_memory, summarize, write_atomic, RunArtifact, RunOutcome,
    RunSummary, METRICS_FILE, METRICS_HEADER, SUMMARY_FILE,
};
pub use sweep::{sweep, sweep_in_memory, SweepParam, SweepReport, SweepRow, SWEEP_FILE, SWEEP_HEADER};
pub use verify::{
    gradient_check_losses, random_posterior, random_untied_posterior, synthetic_bound_samples, verify, CheckRecord,
    VerifyOptions, VerifyReport,
};
