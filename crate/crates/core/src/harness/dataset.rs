//! Synthetic classification datasets and their noisy-label wrapper.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{CorruptionRecord, LabelNoiseSpec};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Isotropic Gaussian clusters.
    Blobs,
    /// Two interleaved half circles (k = 2, d = 2).
    Moons,
    /// `k` interleaved spiral arms (d = 2).
    Spirals,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub k: usize,
    pub d: usize,
    /// Standard deviation of each blob.
    pub spread: f64,
    /// Distance scale of blob centers from the origin.
    pub center_scale: f64,
    pub moon_noise: f64,
    pub spiral_turns: f64,
    pub spiral_noise: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::Blobs,
            n_train: 2000,
            n_test: 2000,
            k: 4,
            d: 2,
            spread: 1.0,
            center_scale: 4.0,
            moon_noise: 0.1,
            spiral_turns: 1.5,
            spiral_noise: 0.05,
            seed: 0,
        }
    }
}

/// Clean train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct CleanData {
    pub train_features: Array2<f64>,
    pub train_labels: Vec<usize>,
    pub test_features: Array2<f64>,
    pub test_labels: Vec<usize>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Configuration("n_train and n_test must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::Configuration(format!("need at least 2 classes, got {}", self.k)));
        }
        if self.d == 0 {
            return Err(Error::Configuration("feature dimension must be positive".into()));
        }
        for (name, v) in [
            ("spread", self.spread),
            ("center_scale", self.center_scale),
            ("moon_noise", self.moon_noise),
            ("spiral_turns", self.spiral_turns),
            ("spiral_noise", self.spiral_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Configuration(format!(
                    "{name} must be a nonnegative number, got {v}"
                )));
            }
        }
        match self.kind {
            DatasetKind::Blobs => Ok(()),
            DatasetKind::Moons if self.k != 2 || self.d != 2 => Err(Error::Configuration(format!(
                "moons are defined for k = 2, d = 2 only (got k = {}, d = {})",
                self.k, self.d
            ))),
            DatasetKind::Spirals if self.d != 2 => Err(Error::Configuration(format!(
                "spirals are two-dimensional (got d = {})",
                self.d
            ))),
            _ => Ok(()),
        }
    }

    /// Blob centers: scaled basis vectors when `d >= k`, otherwise evenly
    /// spaced on a circle in the first two coordinates (a line when `d = 1`).
    pub fn blob_centers(&self) -> Array2<f64> {
        let (k, d, s) = (self.k, self.d, self.center_scale);
        let mut c = Array2::zeros((k, d));
        for class in 0..k {
            if d >= k {
                c[[class, class]] = s;
            } else if d >= 2 {
                let a = 2.0 * PI * class as f64 / k as f64;
                c[[class, 0]] = s * a.cos();
                c[[class, 1]] = s * a.sin();
            } else {
                c[[class, 0]] = s * class as f64;
            }
        }
        c
    }

    fn sample(&self, n: usize, stream: u64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng::stream(self.seed, stream);
        let mut x = Array2::zeros((n, self.d));
        let labels: Vec<usize> = match self.kind {
            DatasetKind::Moons => (0..n).map(|i| usize::from(i >= n / 2)).collect(),
            _ => (0..n).map(|i| i % self.k).collect(),
        };
        let gauss = |r: &mut rng::Rng| -> f64 { StandardNormal.sample(r) };
        match self.kind {
            DatasetKind::Blobs => {
                let centers = self.blob_centers();
                for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = centers[[labels[i], j]] + self.spread * gauss(&mut r);
                    }
                }
            }
            DatasetKind::Moons => {
                for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
                    let t = PI * r.random::<f64>();
                    let (px, py) = if labels[i] == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    row[0] = px + self.moon_noise * gauss(&mut r);
                    row[1] = py + self.moon_noise * gauss(&mut r);
                }
            }
            DatasetKind::Spirals => {
                for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
                    let u = r.random::<f64>();
                    let angle = 2.0 * PI * (self.spiral_turns * u + labels[i] as f64 / self.k as f64);
                    row[0] = u * angle.cos() + self.spiral_noise * gauss(&mut r);
                    row[1] = u * angle.sin() + self.spiral_noise * gauss(&mut r);
                }
            }
        }
        (x, labels)
    }
}

/// Generates the clean train and test sets (independent streams of the spec's seed).
pub fn make_dataset(spec: &DatasetSpec) -> Result<CleanData> {
    spec.validate()?;
    let (train_features, train_labels) = spec.sample(spec.n_train, 0);
    let (test_features, test_labels) = spec.sample(spec.n_test, 1);
    Ok(CleanData {
        train_features,
        train_labels,
        test_features,
        test_labels,
    })
}

/// Training features with corrupted labels, plus a clean test set.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyDataset {
    pub features: Array2<f64>,
    pub records: Vec<CorruptionRecord>,
    pub test_features: Array2<f64>,
    pub test_labels: Vec<usize>,
    pub k: usize,
}

impl NoisyDataset {
    /// Corrupts the training labels of `clean`; test labels stay clean.
    pub fn from_clean(clean: CleanData, noise: &LabelNoiseSpec, k: usize) -> Result<Self> {
        let records = noise.apply(clean.train_features.view(), &clean.train_labels, k)?;
        let data = NoisyDataset {
            features: clean.train_features,
            records,
            test_features: clean.test_features,
            test_labels: clean.test_labels,
            k,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn build(spec: &DatasetSpec, noise: &LabelNoiseSpec) -> Result<Self> {
        NoisyDataset::from_clean(make_dataset(spec)?, noise, spec.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        if self.records.len() != self.features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.features.nrows(),
                actual: self.records.len(),
            });
        }
        if self.test_labels.len() != self.test_features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.test_features.nrows(),
                actual: self.test_labels.len(),
            });
        }
        if self.test_features.ncols() != self.features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.features.ncols(),
                actual: self.test_features.ncols(),
            });
        }
        Ok(())
    }

    pub fn n_train(&self) -> usize {
        self.records.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn observed_labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.observed_label).collect()
    }

    pub fn clean_labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.clean_label).collect()
    }

    pub fn n_flipped(&self) -> usize {
        self.records.iter().filter(|r| r.flipped).count()
    }

    /// Splits off the rows in `holdout` (returned as features and observed
    /// labels) and keeps the rest as the training set.
    pub fn split_holdout(&self, holdout: &[usize]) -> (NoisyDataset, Array2<f64>, Vec<usize>) {
        let mut is_held = vec![false; self.n_train()];
        holdout.iter().for_each(|&i| is_held[i] = true);
        let keep: Vec<usize> = (0..self.n_train()).filter(|&i| !is_held[i]).collect();
        let train = NoisyDataset {
            features: self.features.select(Axis(0), &keep),
            records: keep.iter().map(|&i| self.records[i]).collect(),
            test_features: self.test_features.clone(),
            test_labels: self.test_labels.clone(),
            k: self.k,
        };
        let val_x = self.features.select(Axis(0), holdout);
        let val_y = holdout.iter().map(|&i| self.records[i].observed_label).collect();
        (train, val_x, val_y)
    }
}
