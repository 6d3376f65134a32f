//! End-to-end experiment runs and their on-disk artifacts.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{EffectiveSeeds, ExperimentConfig};
use super::dataset::NoisyDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::trainer::{self, EpochMetrics, MlpModel};

pub const METRICS_HEADER: &str = "epoch,q,lambda,lr,mean_train_loss,train_acc_clean,train_acc_noisy,test_acc";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// In-memory result of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub n_train: usize,
    pub n_flipped: usize,
    pub n_holdout: usize,
    /// Accuracy on the holdout rows against their observed labels.
    pub holdout_acc: Option<f64>,
}

impl RunOutcome {
    pub fn final_test_acc(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.test_acc)
    }

    /// Best test accuracy and the (first) epoch reaching it.
    pub fn best_test_acc(&self) -> (f64, usize) {
        self.metrics.iter().fold((f64::NEG_INFINITY, 0), |(best, at), m| {
            if m.test_acc > best {
                (m.test_acc, m.epoch)
            } else {
                (best, at)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_test_acc: f64,
    pub best_test_acc: f64,
    pub best_epoch: usize,
    pub final_train_acc_clean: f64,
    pub final_train_acc_noisy: f64,
    pub n_train: usize,
    pub n_flipped: usize,
    pub n_holdout: usize,
    pub holdout_acc: Option<f64>,
    pub wall_time_secs: f64,
    pub effective_seeds: EffectiveSeeds,
    /// The full config with every default filled in.
    pub config: ExperimentConfig,
}

/// Paths written by [`run_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub metrics_csv: PathBuf,
    pub summary_json: PathBuf,
    pub summary: RunSummary,
}

/// Builds the noisy dataset a config describes, with effective seeds applied.
pub fn build_dataset(config: &ExperimentConfig) -> Result<NoisyDataset> {
    let seeds = config.effective_seeds();
    let mut spec = config.dataset.clone();
    spec.seed = seeds.dataset;
    let mut noise = config.noise.clone();
    noise.seed = seeds.noise;
    NoisyDataset::build(&spec, &noise)
}

/// Trains per `config` without touching the file system.
///
/// On divergence the returned `TrainingFailure` carries the metrics of
/// every completed epoch.
pub fn run_in_memory(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let seeds = config.effective_seeds();
    let full = build_dataset(config)?;
    let n_holdout = (config.holdout_fraction * full.n_train() as f64).round() as usize;
    let (data, holdout) = if n_holdout > 0 {
        if n_holdout >= full.n_train() {
            return Err(Error::Configuration("holdout would leave no training rows".into()));
        }
        let mut idx: Vec<usize> = (0..full.n_train()).collect();
        idx.shuffle(&mut rng::stream(seeds.holdout, 0));
        let mut held = idx[..n_holdout].to_vec();
        held.sort_unstable();
        let (train, vx, vy) = full.split_holdout(&held);
        (train, Some((vx, vy)))
    } else {
        (full, None)
    };

    let mut model = MlpModel::init(&config.layer_dims(), seeds.init)?;
    let mut opt = config.optimizer.clone();
    opt.seed = seeds.shuffle;
    let metrics = trainer::train(&mut model, &data, &config.loss, &opt)?;
    let holdout_acc = holdout.map(|(vx, vy)| trainer::accuracy(&model, vx.view(), &vy));
    Ok(RunOutcome {
        metrics,
        n_train: data.n_train(),
        n_flipped: data.n_flipped(),
        n_holdout,
        holdout_acc,
    })
}

/// Renders metrics as CSV (header plus one LF-terminated row per epoch).
pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut s = String::with_capacity(64 * (metrics.len() + 1));
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for m in metrics {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            m.epoch, m.q_used, m.lambda_used, m.lr, m.mean_train_loss, m.train_acc_clean, m.train_acc_noisy, m.test_acc
        )
        .expect("writing to a String");
    }
    s
}

/// Writes `bytes` to `path` via a temp file in the same directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Runs `config` and writes `metrics.csv` and `summary.json` into its
/// (resolved) output directory.
///
/// If training diverges, the metrics of completed epochs are still written
/// before the error is returned; no summary is written in that case.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifact> {
    config.validate()?;
    let dir = config.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    let summary_path = dir.join(SUMMARY_FILE);

    let start = Instant::now();
    let outcome = match run_in_memory(config) {
        Ok(o) => o,
        Err(Error::TrainingFailure { epoch, metrics }) => {
            write_atomic(&metrics_path, metrics_csv(&metrics).as_bytes())?;
            return Err(Error::TrainingFailure { epoch, metrics });
        }
        Err(e) => return Err(e),
    };
    let wall_time_secs = start.elapsed().as_secs_f64();

    let summary = summarize(config, &outcome, wall_time_secs);
    write_atomic(&metrics_path, metrics_csv(&outcome.metrics).as_bytes())?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_atomic(&summary_path, json.as_bytes())?;
    Ok(RunArtifact {
        dir,
        metrics_csv: metrics_path,
        summary_json: summary_path,
        summary,
    })
}

pub fn summarize(config: &ExperimentConfig, outcome: &RunOutcome, wall_time_secs: f64) -> RunSummary {
    let (best_test_acc, best_epoch) = outcome.best_test_acc();
    let last = outcome.metrics.last();
    RunSummary {
        final_test_acc: outcome.final_test_acc(),
        best_test_acc,
        best_epoch,
        final_train_acc_clean: last.map_or(0.0, |m| m.train_acc_clean),
        final_train_acc_noisy: last.map_or(0.0, |m| m.train_acc_noisy),
        n_train: outcome.n_train,
        n_flipped: outcome.n_flipped,
        n_holdout: outcome.n_holdout,
        holdout_acc: outcome.holdout_acc,
        wall_time_secs,
        effective_seeds: config.effective_seeds(),
        config: config.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DatasetSpec;
    use crate::noise::LabelNoiseSpec;
    use crate::trainer::{LossSchedule, OptimizerConfig};

    fn small(loss: LossSchedule) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSpec {
                n_train: 200,
                n_test: 100,
                ..DatasetSpec::default()
            },
            noise: LabelNoiseSpec::symmetric(0.2, 0),
            model: super::super::ModelSpec { hidden: vec![8] },
            optimizer: OptimizerConfig {
                epochs: 5,
                batch_size: 32,
                lr0: 0.05,
                ..OptimizerConfig::default()
            },
            ..ExperimentConfig::with_loss(loss)
        }
    }

    #[test]
    fn csv_has_fixed_header() {
        let out = run_in_memory(&small(LossSchedule::Ce)).unwrap();
        let csv = metrics_csv(&out.metrics);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(lines.count(), 5);
        assert!(!csv.contains('\r'));
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = small(LossSchedule::Dal {
            q_s: 0.6,
            q_e: 1.5,
            lambda_e: 1.0,
        });
        let a = metrics_csv(&run_in_memory(&cfg).unwrap().metrics);
        let b = metrics_csv(&run_in_memory(&cfg).unwrap().metrics);
        assert_eq!(a, b);
    }

    #[test]
    fn holdout_reduces_training_set() {
        let cfg = ExperimentConfig {
            holdout_fraction: 0.1,
            ..small(LossSchedule::Ce)
        };
        let out = run_in_memory(&cfg).unwrap();
        assert_eq!(out.n_holdout, 20);
        assert_eq!(out.n_train, 180);
        assert!(out.holdout_acc.is_some());
    }

    #[test]
    fn writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            output_dir: dir.path().join("run"),
            ..small(LossSchedule::Mae)
        };
        let art = run_experiment(&cfg).unwrap();
        let csv = std::fs::read_to_string(&art.metrics_csv).unwrap();
        assert!(csv.starts_with(METRICS_HEADER));
        let summary: RunSummary = serde_json::from_str(&std::fs::read_to_string(&art.summary_json).unwrap()).unwrap();
        assert_eq!(summary.config, cfg);
        assert_eq!(summary.final_test_acc, art.summary.final_test_acc);
    }
}
