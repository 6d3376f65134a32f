//! Experiment configuration (one JSON document per run).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::noise::LabelNoiseSpec;
use crate::trainer::{LossSchedule, OptimizerConfig};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "DAL_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// Hidden layer widths; input and output sizes come from the data.
    pub hidden: Vec<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { hidden: vec![64, 64] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default = "LabelNoiseSpec::none")]
    pub noise: LabelNoiseSpec,
    pub loss: LossSchedule,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Fraction of the noisy training set held out for validation
    /// (unstratified uniform selection). Zero disables the holdout.
    #[serde(default)]
    pub holdout_fraction: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Master seed, mixed into every component seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

/// Seeds actually used by each component of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveSeeds {
    pub dataset: u64,
    pub noise: u64,
    pub init: u64,
    pub shuffle: u64,
    pub holdout: u64,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive(master: u64, tag: u64, local: u64) -> u64 {
    mix(mix(master ^ mix(tag)) ^ local)
}

impl ExperimentConfig {
    /// A config with desk-scale defaults and the given loss.
    pub fn with_loss(loss: LossSchedule) -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            noise: LabelNoiseSpec::none(),
            loss,
            model: ModelSpec::default(),
            optimizer: OptimizerConfig::default(),
            holdout_fraction: 0.0,
            output_dir: default_output_dir(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if !(0.0..=1.0).contains(&self.noise.eta) {
            return Err(Error::domain(
                "eta",
                format!("noise rate must lie in [0, 1], got {}", self.noise.eta),
            ));
        }
        if let crate::noise::NoiseKind::Asymmetric = self.noise.kind {
            let map = self.noise.resolved_class_map(self.dataset.k)?;
            if map.len() != self.dataset.k {
                return Err(Error::Configuration(format!(
                    "class map covers {} classes, dataset has {}",
                    map.len(),
                    self.dataset.k
                )));
            }
        }
        self.optimizer.validate()?;
        self.loss.validate(self.optimizer.epochs)?;
        if self.model.hidden.contains(&0) {
            return Err(Error::Configuration("hidden layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Configuration(format!(
                "holdout_fraction must lie in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.dataset.d];
        dims.extend(&self.model.hidden);
        dims.push(self.dataset.k);
        dims
    }

    pub fn effective_seeds(&self) -> EffectiveSeeds {
        EffectiveSeeds {
            dataset: derive(self.seed, 1, self.dataset.seed),
            noise: derive(self.seed, 2, self.noise.seed),
            init: derive(self.seed, 3, 0),
            shuffle: derive(self.seed, 4, self.optimizer.seed),
            holdout: derive(self.seed, 5, 0),
        }
    }

    /// Output directory after applying [`OUTPUT_ROOT_ENV`] to relative paths.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => Path::new(&root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_gets_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"loss": {"kind": "ce"}}"#).unwrap();
        assert_eq!(cfg.dataset.k, 4);
        assert_eq!(cfg.optimizer.epochs, 150);
        assert_eq!(cfg.layer_dims(), vec![2, 64, 64, 4]);
        assert_eq!(cfg.noise.eta, 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"loss": {"kind": "gce", "q": -1}}"#).is_err());
        assert!(
            ExperimentConfig::from_json(r#"{"loss": {"kind": "ce"}, "noise": {"kind": "symmetric", "eta": 2}}"#)
                .is_err()
        );
        assert!(ExperimentConfig::from_json(
            r#"{"loss": {"kind": "ce"}, "noise": {"kind": "asymmetric", "eta": 0.2}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(r#"{"loss": {"kind": "dal", "q_s": 2.0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"loss": {"kind": "nope"}}"#).is_err());
    }

    #[test]
    fn seeds_depend_on_master() {
        let a = ExperimentConfig::with_loss(LossSchedule::Ce);
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(a.effective_seeds(), a.clone().effective_seeds());
        assert_ne!(a.effective_seeds().dataset, b.effective_seeds().dataset);
        assert_ne!(a.effective_seeds().dataset, a.effective_seeds().noise);
    }
}
