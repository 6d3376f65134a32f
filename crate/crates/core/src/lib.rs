//! Robust losses for learning with noisy labels, with a dynamics-aware loss
//! that moves from fitting to robustness over training.
//!
//! * [`losses`]: CE, MAE, GCE, TCE, JS, the bootstrapping term and DAL, their
//!   gradients, and the epoch schedules.
//! * [`noise`]: symmetric, asymmetric and instance-dependent label corruption.
//! * [`theory`]: pointwise risks and numerical checks of the risk minimizers.
//! * [`trainer`]: a small MLP trained by minibatch SGD.
//! * [`harness`]: synthetic datasets, experiment runs, sweeps and reports.

pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod losses;
pub mod noise;
pub mod prob;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use harness::{DatasetSpec, ExperimentConfig, NoisyDataset};
pub use losses::{DalSchedule, LossSpec};
pub use noise::{CorruptionRecord, LabelNoiseSpec, NoiseKind};
pub use prob::ProbVector;
pub use trainer::{EpochMetrics, LossSchedule, MlpModel, OptimizerConfig};
