//! Epoch schedules for the dynamic losses.

use serde::{Deserialize, Serialize};

use super::LossSpec;
use crate::error::{Error, Result};

/// Smallest distance the JS mixing weight keeps from 0 and 1.
pub const JS_RAMP_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleValue {
    pub q: f64,
    pub lambda: f64,
}

/// Linear ramp of the GCE exponent from `q_s` to `q_e` over `T` epochs, with
/// a bootstrapping weight that ramps from 0 at the epoch `t0` where `q`
/// crosses 1 up to `lambda_e` at `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DalSchedule {
    total_epochs: usize,
    q_s: f64,
    q_e: f64,
    lambda_e: f64,
}

impl DalSchedule {
    pub fn new(total_epochs: usize, q_s: f64, q_e: f64, lambda_e: f64) -> Result<Self> {
        if total_epochs == 0 {
            return Err(Error::domain("T", "total epochs must be positive"));
        }
        if !(q_s.is_finite() && q_s >= 0.0) {
            return Err(Error::domain("q_s", format!("need q_s >= 0, got {q_s}")));
        }
        if !(q_e.is_finite() && q_e >= q_s && q_e > 0.0) {
            return Err(Error::domain(
                "q_e",
                format!("need q_e >= q_s and q_e > 0, got q_s = {q_s}, q_e = {q_e}"),
            ));
        }
        if !(lambda_e.is_finite() && lambda_e >= 0.0) {
            return Err(Error::domain("lambda_e", format!("need lambda_e >= 0, got {lambda_e}")));
        }
        Ok(DalSchedule {
            total_epochs,
            q_s,
            q_e,
            lambda_e,
        })
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    /// The (real-valued) epoch at which `q(t) = 1`; `None` when `q` is constant.
    pub fn t0(&self) -> Option<f64> {
        if self.q_e == self.q_s {
            None
        } else {
            Some((1.0 - self.q_s) / (self.q_e - self.q_s) * self.total_epochs as f64)
        }
    }

    /// Schedule value at a real-valued epoch `t`.
    pub fn at(&self, t: f64) -> ScheduleValue {
        let big_t = self.total_epochs as f64;
        let q = self.q_s + (self.q_e - self.q_s) * t / big_t;
        let lambda = if self.q_e <= 1.0 {
            0.0
        } else {
            match self.t0() {
                // Constant q > 1: t0 -> -inf, so the ramp ratio is 1 throughout.
                None => self.lambda_e,
                Some(t0) if t < t0 || t0 > big_t => 0.0,
                Some(t0) => self.lambda_e * (t - t0) / (big_t - t0),
            }
        };
        ScheduleValue { q, lambda }
    }

    /// The DAL loss to minimize during epoch `t` (1-based).
    pub fn loss_at(&self, t: usize) -> LossSpec {
        let v = self.at(t as f64);
        LossSpec::Dal {
            q: v.q,
            lambda: v.lambda,
        }
    }
}

/// `(q(t), lambda(t))` for integer epoch `t` in `1..=T`.
pub fn schedule_at(t: usize, total_epochs: usize, q_s: f64, q_e: f64, lambda_e: f64) -> Result<ScheduleValue> {
    let s = DalSchedule::new(total_epochs, q_s, q_e, lambda_e)?;
    check_epoch(t, total_epochs)?;
    Ok(s.at(t as f64))
}

/// Interpolation families given a dynamic hyper-parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicFamily {
    /// Truncation order falls from 20 to 1.
    Tce,
    /// Mixing weight rises from 0 to 1.
    Js,
}

impl DynamicFamily {
    pub fn loss_at(self, t: usize, total_epochs: usize) -> Result<LossSpec> {
        let v = dynamic_param(self, t, total_epochs)?;
        Ok(match self {
            DynamicFamily::Tce => LossSpec::Tce { t: v as u32 },
            DynamicFamily::Js => LossSpec::Js { pi1: v },
        })
    }
}

/// Hyper-parameter of a dynamic TCE or JS loss at epoch `t` of `T`.
///
/// TCE rounds `20 - 19 (t - 1)/(T - 1)` so the first epoch uses 20 terms and
/// the last uses 1. JS uses `t / T` (the same ramp convention as `q(t)`),
/// clamped to `[eps, 1 - eps]`.
pub fn dynamic_param(family: DynamicFamily, t: usize, total_epochs: usize) -> Result<f64> {
    check_epoch(t, total_epochs)?;
    Ok(match family {
        DynamicFamily::Tce => {
            if total_epochs == 1 {
                1.0
            } else {
                let frac = (t - 1) as f64 / (total_epochs - 1) as f64;
                (20.0 - 19.0 * frac).round()
            }
        }
        DynamicFamily::Js => (t as f64 / total_epochs as f64).clamp(JS_RAMP_EPS, 1.0 - JS_RAMP_EPS),
    })
}

fn check_epoch(t: usize, total_epochs: usize) -> Result<()> {
    if total_epochs == 0 {
        return Err(Error::domain("T", "total epochs must be positive"));
    }
    if t == 0 || t > total_epochs {
        return Err(Error::domain("t", format!("epoch {t} outside 1..={total_epochs}")));
    }
    Ok(())
}
