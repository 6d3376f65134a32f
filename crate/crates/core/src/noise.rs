//! Synthetic label corruption.
//!
//! Each generator returns one [`CorruptionRecord`] per input label. Example
//! `i` draws from its own random stream `(seed, i)`, so results do not depend
//! on evaluation order and the per-example work runs in parallel.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::softmax_into;
use crate::rng;

/// Standard deviation of the per-example flip rate for instance noise.
pub const INSTANCE_RATE_STD: f64 = 0.1;

/// Stream index reserved for the instance-noise projection matrices.
const PROJECTION_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Symmetric,
    Asymmetric,
    Instance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelNoiseSpec {
    pub kind: NoiseKind,
    pub eta: f64,
    /// Explicit class map for asymmetric noise (`class_map[c]` is the
    /// corrupted class of `c`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_map: Option<Vec<usize>>,
    /// Builds a cyclic within-group map when `class_map` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl LabelNoiseSpec {
    pub fn none() -> Self {
        LabelNoiseSpec {
            kind: NoiseKind::Symmetric,
            eta: 0.0,
            class_map: None,
            group_size: None,
            seed: 0,
        }
    }

    pub fn symmetric(eta: f64, seed: u64) -> Self {
        LabelNoiseSpec {
            kind: NoiseKind::Symmetric,
            eta,
            seed,
            ..LabelNoiseSpec::none()
        }
    }

    pub fn instance(eta: f64, seed: u64) -> Self {
        LabelNoiseSpec {
            kind: NoiseKind::Instance,
            eta,
            seed,
            ..LabelNoiseSpec::none()
        }
    }

    /// Resolves the class map used by asymmetric noise.
    pub fn resolved_class_map(&self, k: usize) -> Result<Vec<usize>> {
        match (&self.class_map, self.group_size) {
            (Some(map), _) => Ok(map.clone()),
            (None, Some(g)) => make_cyclic_group_map(k, g),
            (None, None) => Err(Error::Configuration(
                "asymmetric noise needs `class_map` or `group_size`".into(),
            )),
        }
    }

    /// Corrupts `labels`; `features` is only read by instance noise.
    pub fn apply(&self, features: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> Result<Vec<CorruptionRecord>> {
        match self.kind {
            NoiseKind::Symmetric => corrupt_symmetric(labels, self.eta, k, self.seed),
            NoiseKind::Asymmetric => {
                let map = self.resolved_class_map(k)?;
                check_labels(labels, k)?;
                corrupt_asymmetric(labels, self.eta, &map, self.seed)
            }
            NoiseKind::Instance => corrupt_instance(features, labels, self.eta, k, self.seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub clean_label: usize,
    pub observed_label: usize,
    pub flipped: bool,
}

impl CorruptionRecord {
    fn new(clean_label: usize, observed_label: usize) -> Self {
        CorruptionRecord {
            clean_label,
            observed_label,
            flipped: clean_label != observed_label,
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::domain(
            "eta",
            format!("noise rate must lie in [0, 1], got {eta}"),
        ))
    }
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Configuration(format!("need at least 2 classes, got {k}")));
    }
    match labels.iter().find(|&&y| y >= k) {
        Some(y) => Err(Error::InvalidInput(format!("label {y} out of range for k = {k}"))),
        None => Ok(()),
    }
}

/// With probability `eta`, replaces each label by a uniform draw over all `k`
/// classes (which may return the original class).
pub fn corrupt_symmetric(labels: &[usize], eta: f64, k: usize, seed: u64) -> Result<Vec<CorruptionRecord>> {
    check_eta(eta)?;
    check_labels(labels, k)?;
    Ok(labels
        .par_iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(seed, i as u64);
            let observed = if r.random::<f64>() < eta {
                r.random_range(0..k)
            } else {
                y
            };
            CorruptionRecord::new(y, observed)
        })
        .collect())
}

/// With probability `eta`, replaces each label `y` by `class_map[y]`.
pub fn corrupt_asymmetric(labels: &[usize], eta: f64, class_map: &[usize], seed: u64) -> Result<Vec<CorruptionRecord>> {
    check_eta(eta)?;
    let k = class_map.len();
    if let Some(bad) = class_map.iter().find(|&&c| c >= k) {
        return Err(Error::Configuration(format!(
            "class map target {bad} out of range for {k} classes"
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Configuration(format!("class map does not cover label {y}")));
    }
    Ok(labels
        .par_iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(seed, i as u64);
            let observed = if r.random::<f64>() < eta { class_map[y] } else { y };
            CorruptionRecord::new(y, observed)
        })
        .collect())
}

/// Feature-dependent label noise.
///
/// 1. Each example draws a flip rate `r_i ~ N(eta, 0.1)` truncated to
///    `[0, 1]` (exactly 0 when `eta = 0`).
/// 2. One `d x k` standard-normal projection `W_c` is drawn per class.
/// 3. For standardized features `x_i` with label `y_i`, the scores
///    `x_i W_{y_i}` are softmaxed with the own class excluded, scaled by
///    `r_i`, and the own class receives `1 - r_i`.
/// 4. The observed label is drawn from that distribution.
pub fn corrupt_instance(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    eta: f64,
    k: usize,
    seed: u64,
) -> Result<Vec<CorruptionRecord>> {
    check_eta(eta)?;
    check_labels(labels, k)?;
    let (n, d) = features.dim();
    if d == 0 {
        return Err(Error::Configuration("instance noise needs at least one feature".into()));
    }
    if n != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: n,
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature".into()));
    }
    let x = standardize(features);
    let mut proj_rng = rng::stream(seed, PROJECTION_STREAM);
    let projections: Vec<Array2<f64>> = (0..k)
        .map(|_| Array2::from_shape_simple_fn((d, k), || StandardNormal.sample(&mut proj_rng)))
        .collect();

    Ok(labels
        .par_iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(seed, i as u64);
            let rate = truncated_rate(eta, &mut r);
            let mut scores = x.row(i).dot(&projections[y]).to_vec();
            scores[y] = f64::NEG_INFINITY;
            let mut probs = vec![0.0; k];
            softmax_into(&scores, &mut probs);
            for p in probs.iter_mut() {
                *p *= rate;
            }
            probs[y] = 1.0 - rate;
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut observed = y;
            for (c, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    observed = c;
                    break;
                }
            }
            CorruptionRecord::new(y, observed)
        })
        .collect())
}

fn truncated_rate(eta: f64, r: &mut rng::Rng) -> f64 {
    if eta == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(r);
        let v = eta + INSTANCE_RATE_STD * z;
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
}

/// Per-column z-scores; constant columns are only centered.
fn standardize(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) / sd);
    }
    out
}

/// Within each consecutive block of `group_size` classes, maps every class to
/// the next one in the block, wrapping around to the block start.
pub fn make_cyclic_group_map(k: usize, group_size: usize) -> Result<Vec<usize>> {
    if group_size == 0 || !k.is_multiple_of(group_size) {
        return Err(Error::Configuration(format!(
            "group size {group_size} does not divide {k} classes"
        )));
    }
    Ok((0..k)
        .map(|c| {
            let start = c - c % group_size;
            start + (c - start + 1) % group_size
        })
        .collect())
}
