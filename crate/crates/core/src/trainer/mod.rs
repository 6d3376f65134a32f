//! Minibatch SGD training of a small softmax classifier under any loss or
//! loss schedule, with per-epoch accuracy on the clean-labeled and
//! corrupted-labeled training subsets.

mod model;

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::NoisyDataset;
use crate::losses::{DalSchedule, DynamicFamily, LossSpec};
use crate::prob::{argmax, softmax_into};
use crate::rng;

pub use model::{Gradients, MlpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr0: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 150,
            lr_schedule: LrSchedule::Cosine,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::domain(
                "lr0",
                format!("learning rate must be positive, got {}", self.lr0),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain(
                "momentum",
                format!("need 0 <= momentum < 1, got {}", self.momentum),
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::domain(
                "weight_decay",
                format!("must be >= 0, got {}", self.weight_decay),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size", "must be positive"));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr0,
            LrSchedule::Cosine => cosine_lr(epoch, self.epochs, self.lr0),
        }
    }
}

/// Which loss to minimize at each epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSchedule {
    Ce,
    Mae,
    Gce {
        q: f64,
    },
    Tce {
        t: u32,
    },
    Js {
        pi1: f64,
    },
    /// Linear `q` ramp with a bootstrapping term after `q` crosses 1.
    Dal {
        q_s: f64,
        #[serde(default = "default_q_e")]
        q_e: f64,
        #[serde(default = "default_lambda_e")]
        lambda_e: f64,
    },
    /// TCE with the truncation order falling from 20 to 1.
    DynamicTce,
    /// JS with the mixing weight rising from 0 to 1.
    DynamicJs,
}

fn default_q_e() -> f64 {
    1.5
}

fn default_lambda_e() -> f64 {
    1.0
}

impl LossSchedule {
    pub fn fixed(spec: LossSpec) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            LossSpec::Ce => LossSchedule::Ce,
            LossSpec::Mae => LossSchedule::Mae,
            LossSpec::Gce { q } => LossSchedule::Gce { q },
            LossSpec::Tce { t } => LossSchedule::Tce { t },
            LossSpec::Js { pi1 } => LossSchedule::Js { pi1 },
            other => {
                return Err(Error::Configuration(format!(
                    "`{other}` is not available as a fixed training loss"
                )))
            }
        })
    }

    pub fn validate(&self, total_epochs: usize) -> Result<()> {
        match *self {
            LossSchedule::Dal { q_s, q_e, lambda_e } => {
                DalSchedule::new(total_epochs.max(1), q_s, q_e, lambda_e)?;
                Ok(())
            }
            LossSchedule::DynamicTce | LossSchedule::DynamicJs => Ok(()),
            _ => self.loss_at(1, total_epochs.max(1))?.validate(),
        }
    }

    /// The loss minimized during epoch `t` (1-based) of `total_epochs`.
    pub fn loss_at(&self, t: usize, total_epochs: usize) -> Result<LossSpec> {
        let spec = match *self {
            LossSchedule::Ce => LossSpec::Ce,
            LossSchedule::Mae => LossSpec::Mae,
            LossSchedule::Gce { q } => LossSpec::Gce { q },
            LossSchedule::Tce { t } => LossSpec::Tce { t },
            LossSchedule::Js { pi1 } => LossSpec::Js { pi1 },
            LossSchedule::Dal { q_s, q_e, lambda_e } => DalSchedule::new(total_epochs, q_s, q_e, lambda_e)?.loss_at(t),
            LossSchedule::DynamicTce => DynamicFamily::Tce.loss_at(t, total_epochs)?,
            LossSchedule::DynamicJs => DynamicFamily::Js.loss_at(t, total_epochs)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub q_used: f64,
    pub lambda_used: f64,
    pub lr: f64,
    /// Mean loss over the epoch's minibatch evaluations.
    pub mean_train_loss: f64,
    /// Accuracy on training examples whose label was not corrupted.
    pub train_acc_clean: f64,
    /// Accuracy on corrupted training examples, against the observed
    /// (corrupted) label. Zero when no example was corrupted.
    pub train_acc_noisy: f64,
    pub test_acc: f64,
}

/// `lr0 * (1 + cos(pi (t - 1) / T)) / 2`, so epoch 1 runs at `lr0`.
pub fn cosine_lr(t: usize, total_epochs: usize, lr0: f64) -> f64 {
    let frac = t.saturating_sub(1) as f64 / total_epochs.max(1) as f64;
    lr0 * 0.5 * (1.0 + (PI * frac).cos())
}

/// Heavy-ball SGD with decoupled-from-bias weight decay:
/// `v <- momentum v + (g + wd w)`, `w <- w - lr v`. Biases get no decay.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &Gradients,
    velocity: &mut Gradients,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for ((w, g), v) in model
        .weights
        .iter_mut()
        .zip(&grads.weights)
        .zip(velocity.weights.iter_mut())
    {
        ndarray::Zip::from(w).and(g).and(v).for_each(|w, &g, v| {
            *v = momentum * *v + (g + weight_decay * *w);
            *w -= lr * *v;
        });
    }
    for ((b, g), v) in model
        .biases
        .iter_mut()
        .zip(&grads.biases)
        .zip(velocity.biases.iter_mut())
    {
        ndarray::Zip::from(b).and(g).and(v).for_each(|b, &g, v| {
            *v = momentum * *v + g;
            *b -= lr * *v;
        });
    }
}

/// Accuracy of `model` on rows of `x` against `labels`.
pub fn accuracy(model: &MlpModel, x: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let logits = model.logits_batch(x);
    let hits = logits
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(row, &y)| argmax(row.as_slice().expect("standard layout")) == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Trains `model` in place for `config.epochs` epochs.
///
/// Each epoch picks its loss from `schedule`, reshuffles the training set
/// with stream `(config.seed, epoch)`, runs minibatch SGD (the last partial
/// batch is kept) and then evaluates the updated model.
pub fn train(
    model: &mut MlpModel,
    data: &NoisyDataset,
    schedule: &LossSchedule,
    config: &OptimizerConfig,
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    data.validate()?;
    schedule.validate(config.epochs)?;
    if model.input_dim() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            actual: model.input_dim(),
        });
    }
    if model.num_classes() != data.k {
        return Err(Error::DimensionMismatch {
            expected: data.k,
            actual: model.num_classes(),
        });
    }

    let n = data.n_train();
    let k = data.k;
    let observed = data.observed_labels();
    let mut velocity = Gradients::zeros_like(model);
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut scratch = vec![0.0; k];
    let mut probs = vec![0.0; k];

    for epoch in 1..=config.epochs {
        let spec = schedule.loss_at(epoch, config.epochs)?;
        let lr = config.lr_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, epoch as u64));

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = data.features.select(Axis(0), batch);
            let cache = model.forward_cached(xb.view());
            let scale = 1.0 / batch.len() as f64;
            let mut dz = Array2::zeros((batch.len(), k));
            for (r, &i) in batch.iter().enumerate() {
                let z = cache.logits.row(r);
                softmax_into(z.as_slice().expect("standard layout"), &mut probs);
                let y = observed[i];
                loss_sum += spec.value(&probs, y);
                let mut row = dz.row_mut(r);
                spec.grad_logits_into(&probs, y, &mut scratch, row.as_slice_mut().expect("standard layout"));
                row.mapv_inplace(|g| g * scale);
            }
            let grads = model.backward_cached(&cache, dz);
            sgd_step(model, &grads, &mut velocity, lr, config.momentum, config.weight_decay);
        }

        let mean_train_loss = loss_sum / n as f64;
        if !mean_train_loss.is_finite() || !model.is_finite() {
            return Err(Error::TrainingFailure { epoch, metrics });
        }
        metrics.push(evaluate(model, data, &observed, epoch, &spec, lr, mean_train_loss));
    }
    Ok(metrics)
}

fn evaluate(
    model: &MlpModel,
    data: &NoisyDataset,
    observed: &[usize],
    epoch: usize,
    spec: &LossSpec,
    lr: f64,
    mean_train_loss: f64,
) -> EpochMetrics {
    let logits = model.logits_batch(data.features.view());
    let (mut clean_hit, mut clean_n, mut noisy_hit, mut noisy_n) = (0usize, 0usize, 0usize, 0usize);
    for ((row, rec), &y) in logits.axis_iter(Axis(0)).zip(&data.records).zip(observed) {
        let hit = argmax(row.as_slice().expect("standard layout")) == y;
        if rec.flipped {
            noisy_n += 1;
            noisy_hit += usize::from(hit);
        } else {
            clean_n += 1;
            clean_hit += usize::from(hit);
        }
    }
    let frac = |h: usize, n: usize| if n == 0 { 0.0 } else { h as f64 / n as f64 };
    EpochMetrics {
        epoch,
        q_used: spec.reported_q(),
        lambda_used: spec.reported_lambda(),
        lr,
        mean_train_loss,
        train_acc_clean: frac(clean_hit, clean_n),
        train_acc_noisy: frac(noisy_hit, noisy_n),
        test_acc: accuracy(model, data.test_features.view(), &data.test_labels),
    }
}
