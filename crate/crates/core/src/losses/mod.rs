//! Robust classification losses on the probability simplex.
//!
//! Every loss is a function `L(f, y)` of a probability vector `f` and a class
//! index `y`. Gradients are available with respect to `f` itself and, through
//! the softmax Jacobian, with respect to the pre-softmax logits.
//!
//! | kind | value | d/df_y |
//! |------|-------|--------|
//! | CE   | `-ln f_y` | `-1/f_y` |
//! | MAE  | `1 - f_y` | `-1` |
//! | GCE  | `(1 - f_y^q)/q` | `-f_y^(q-1)` |
//! | TCE  | `sum_{i<=t} (1 - f_y)^i / i` | `-sum_{i<=t} (1 - f_y)^(i-1)` |
//! | JS   | scaled Jensen-Shannon divergence to `e_y` | see [`js_coefficient`] |
//! | BS   | `-ln max_i f_i` | `-1/max f` at the argmax |
//! | DAL  | `GCE(q) + lambda/(q ln k) * BS` | sum of the two |

mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{argmax, clamp_prob, ProbVector};

pub use schedule::{dynamic_param, schedule_at, DalSchedule, DynamicFamily, ScheduleValue};

/// A loss family together with its hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec {
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
    /// Bootstrapping term `-ln max_i f_i`; ignores the label.
    Bs,
    Dal {
        q: f64,
        lambda: f64,
    },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Ce | LossSpec::Mae | LossSpec::Bs => Ok(()),
            LossSpec::Gce { q } => {
                if q.is_finite() && q >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::domain("q", format!("GCE needs q >= 0, got {q}")))
                }
            }
            LossSpec::Tce { t } => {
                if t >= 1 {
                    Ok(())
                } else {
                    Err(Error::domain("t", "TCE needs at least one term"))
                }
            }
            LossSpec::Js { pi1 } => {
                if pi1 > 0.0 && pi1 < 1.0 {
                    Ok(())
                } else {
                    Err(Error::domain("pi1", format!("JS needs 0 < pi1 < 1, got {pi1}")))
                }
            }
            LossSpec::Dal { q, lambda } => {
                if !(q.is_finite() && q > 0.0) {
                    return Err(Error::domain("q", format!("DAL needs q > 0, got {q}")));
                }
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::domain("lambda", format!("DAL needs lambda >= 0, got {lambda}")));
                }
                Ok(())
            }
        }
    }

    /// The exponent-like hyper-parameter reported in metrics: the GCE
    /// exponent for CE (0), MAE (1), GCE and DAL; the family's own parameter
    /// for TCE and JS; 0 for BS.
    pub fn reported_q(&self) -> f64 {
        match *self {
            LossSpec::Ce | LossSpec::Bs => 0.0,
            LossSpec::Mae => 1.0,
            LossSpec::Gce { q } | LossSpec::Dal { q, .. } => q,
            LossSpec::Tce { t } => f64::from(t),
            LossSpec::Js { pi1 } => pi1,
        }
    }

    pub fn reported_lambda(&self) -> f64 {
        match *self {
            LossSpec::Dal { lambda, .. } => lambda,
            _ => 0.0,
        }
    }

    /// Loss value on a raw probability slice. Assumes a validated spec and a
    /// valid probability vector.
    pub fn value(&self, f: &[f64], y: usize) -> f64 {
        match *self {
            LossSpec::Ce => -clamp_prob(f[y]).ln(),
            LossSpec::Mae => 1.0 - f[y],
            LossSpec::Gce { q } => gce_value(q, f[y]),
            LossSpec::Tce { t } => {
                let r = 1.0 - f[y];
                let mut acc = 0.0;
                let mut pow = 1.0;
                for i in 1..=t {
                    pow *= r;
                    acc += pow / f64::from(i);
                }
                acc
            }
            LossSpec::Js { pi1 } => js_value(pi1, f, y),
            LossSpec::Bs => bs_value(f),
            LossSpec::Dal { q, lambda } => gce_value(q, f[y]) + lambda / (q * (f.len() as f64).ln()) * bs_value(f),
        }
    }

    /// Writes `dL/df` into `out`.
    pub fn grad_prob_into(&self, f: &[f64], y: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        match *self {
            LossSpec::Ce => out[y] = -1.0 / clamp_prob(f[y]),
            LossSpec::Mae => out[y] = -1.0,
            LossSpec::Gce { q } => out[y] = -gce_coefficient(q, f[y]),
            LossSpec::Tce { t } => out[y] = -tce_coefficient(t, f[y]),
            LossSpec::Js { pi1 } => out[y] = -js_coefficient(pi1, f[y]),
            LossSpec::Bs => {
                let m = argmax(f);
                out[m] = -1.0 / clamp_prob(f[m]);
            }
            LossSpec::Dal { q, lambda } => {
                out[y] = -gce_coefficient(q, f[y]);
                let m = argmax(f);
                let scale = lambda / (q * (f.len() as f64).ln());
                out[m] += scale * (-1.0 / clamp_prob(f[m]));
            }
        }
    }

    /// Writes `dL/dz` for logits `z` with `f = softmax(z)` into `out`.
    /// `scratch` must have the same length as `f`.
    pub fn grad_logits_into(&self, f: &[f64], y: usize, scratch: &mut [f64], out: &mut [f64]) {
        if let LossSpec::Ce = self {
            // J^T (-e_y / f_y) collapses to f - e_y.
            out.copy_from_slice(f);
            out[y] -= 1.0;
            return;
        }
        self.grad_prob_into(f, y, scratch);
        softmax_vjp(f, scratch, out);
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LossSpec::Ce => write!(fm, "ce"),
            LossSpec::Mae => write!(fm, "mae"),
            LossSpec::Gce { q } => write!(fm, "gce:{q}"),
            LossSpec::Tce { t } => write!(fm, "tce:{t}"),
            LossSpec::Js { pi1 } => write!(fm, "js:{pi1}"),
            LossSpec::Bs => write!(fm, "bs"),
            LossSpec::Dal { q, lambda } => write!(fm, "dal:{q}:{lambda}"),
        }
    }
}

/// Parses the compact `family[:param[:param]]` form used on the command line,
/// e.g. `ce`, `gce:0.7`, `tce:6`, `js:0.5`, `dal:1.5:1.0`.
impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let family = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params: Vec<&str> = parts.collect();
        let num = |i: usize| -> Result<f64> {
            params
                .get(i)
                .ok_or_else(|| Error::Configuration(format!("loss `{s}` is missing parameter {}", i + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Configuration(format!("loss `{s}`: {e}")))
        };
        let expect = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Configuration(format!(
                    "loss `{s}` takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let spec = match family.as_str() {
            "ce" => {
                expect(0)?;
                LossSpec::Ce
            }
            "mae" => {
                expect(0)?;
                LossSpec::Mae
            }
            "bs" => {
                expect(0)?;
                LossSpec::Bs
            }
            "gce" => {
                expect(1)?;
                LossSpec::Gce { q: num(0)? }
            }
            "tce" => {
                expect(1)?;
                let t = params[0]
                    .parse::<u32>()
                    .map_err(|e| Error::Configuration(format!("loss `{s}`: {e}")))?;
                LossSpec::Tce { t }
            }
            "js" => {
                expect(1)?;
                LossSpec::Js { pi1: num(0)? }
            }
            "dal" => {
                expect(2)?;
                LossSpec::Dal {
                    q: num(0)?,
                    lambda: num(1)?,
                }
            }
            other => return Err(Error::Configuration(format!("unknown loss family `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn gce_value(q: f64, fy: f64) -> f64 {
    if q == 0.0 {
        -clamp_prob(fy).ln()
    } else if q == 1.0 {
        1.0 - fy
    } else {
        // -expm1 keeps precision as q -> 0.
        -(q * clamp_prob(fy).ln()).exp_m1() / q
    }
}

fn bs_value(f: &[f64]) -> f64 {
    -clamp_prob(f[argmax(f)]).ln()
}

/// Jensen-Shannon loss evaluated from its two KL terms with mixture
/// `m = pi1 e_y + (1 - pi1) f`, normalized by `-(1 - pi1) ln(1 - pi1)`.
fn js_value(pi1: f64, f: &[f64], y: usize) -> f64 {
    let w = 1.0 - pi1;
    let norm = -w * w.ln();
    let m_y = pi1 + w * f[y];
    let kl_e_m = -clamp_prob(m_y).ln();
    let kl_f_m: f64 = f
        .iter()
        .enumerate()
        .filter(|(_, &fi)| fi > 0.0)
        .map(|(i, &fi)| {
            let mi = if i == y { m_y } else { w * fi };
            fi * (clamp_prob(fi).ln() - clamp_prob(mi).ln())
        })
        .sum();
    ((pi1 * kl_e_m + w * kl_f_m) / norm).max(0.0)
}

/// `|dL/df_y|` for GCE: `f_y^(q-1)`.
pub fn gce_coefficient(q: f64, fy: f64) -> f64 {
    if q == 1.0 {
        1.0
    } else {
        clamp_prob(fy).powf(q - 1.0)
    }
}

/// `|dL/df_y|` for TCE: `sum_{i=1..t} (1 - f_y)^(i-1)`.
pub fn tce_coefficient(t: u32, fy: f64) -> f64 {
    let r = 1.0 - fy;
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..t {
        acc += pow;
        pow *= r;
    }
    acc
}

/// `|dL/df_y|` for JS restricted to the simplex, where the loss depends on
/// `f_y` only: `(1 - pi1) ln(1 + pi1 / ((1 - pi1) f_y)) / (-(1 - pi1) ln(1 - pi1))`.
pub fn js_coefficient(pi1: f64, fy: f64) -> f64 {
    let w = 1.0 - pi1;
    let norm = -w * w.ln();
    w * (pi1 / (w * clamp_prob(fy))).ln_1p() / norm
}

/// Vector-Jacobian product through softmax: `out_j = f_j (g_j - <f, g>)`.
pub fn softmax_vjp(f: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, &fj), &gj) in out.iter_mut().zip(f).zip(g) {
        *o = fj * (gj - dot);
    }
}

fn check_label(k: usize, y: usize) -> Result<()> {
    if y < k {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("label {y} out of range for k = {k}")))
    }
}

/// Loss value `L(f, y)`.
pub fn loss_value(spec: &LossSpec, f: &ProbVector, y: usize) -> Result<f64> {
    spec.validate()?;
    check_label(f.k(), y)?;
    Ok(spec.value(f.as_slice(), y))
}

/// Exact partial derivatives `dL/df_i`.
pub fn loss_grad_prob(spec: &LossSpec, f: &ProbVector, y: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    check_label(f.k(), y)?;
    let mut out = vec![0.0; f.k()];
    spec.grad_prob_into(f.as_slice(), y, &mut out);
    Ok(out)
}

/// Gradient of `L(softmax(z), y)` with respect to the logits `z`.
pub fn loss_grad_logits(spec: &LossSpec, z: &[f64], y: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let f = ProbVector::softmax(z)?;
    check_label(f.k(), y)?;
    let k = f.k();
    let mut scratch = vec![0.0; k];
    let mut out = vec![0.0; k];
    spec.grad_logits_into(f.as_slice(), y, &mut scratch, &mut out);
    Ok(out)
}

/// Dynamics-aware loss `(1 - f_y^q)/q + lambda * (-ln max f) / (q ln k)`.
pub fn dal_loss(f: &ProbVector, y: usize, q: f64, lambda: f64, k: usize) -> Result<f64> {
    if k != f.k() {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: f.k(),
        });
    }
    loss_value(&LossSpec::Dal { q, lambda }, f, y)
}

/// Magnitude of the coefficient of `grad f_y` along a grid of `f_y` values.
///
/// Each grid point is embedded as the two-class vector `(f_y, 1 - f_y)` with
/// label 0, so the argmax-based terms (BS, DAL) switch on for `f_y >= 0.5`.
pub fn weight_curve(spec: &LossSpec, grid: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if let Some(bad) = grid.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::InvalidInput(format!(
            "grid value {bad} not strictly inside (0, 1)"
        )));
    }
    let mut g = [0.0; 2];
    Ok(grid
        .iter()
        .map(|&fy| {
            spec.grad_prob_into(&[fy, 1.0 - fy], 0, &mut g);
            g[0].abs()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(fy: f64) -> ProbVector {
        ProbVector::new(vec![fy, 1.0 - fy]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn value_examples() {
        close(
            loss_value(&LossSpec::Ce, &two(0.5), 0).unwrap(),
            std::f64::consts::LN_2,
            1e-12,
        );
        // mpmath: (1 - 0.5^0.7)/0.7 = 0.549182561896...
        close(
            loss_value(&LossSpec::Gce { q: 0.7 }, &two(0.5), 0).unwrap(),
            0.549_182_561_896_488,
            1e-12,
        );
        close(loss_value(&LossSpec::Tce { t: 2 }, &two(0.5), 0).unwrap(), 0.625, 1e-15);
        for pi1 in [0.1, 0.5, 0.9] {
            let f = ProbVector::one_hot(3, 1).unwrap();
            assert_eq!(loss_value(&LossSpec::Js { pi1 }, &f, 1).unwrap(), 0.0);
        }
        assert_eq!(
            loss_value(&LossSpec::Mae, &ProbVector::one_hot(2, 1).unwrap(), 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn gce_endpoints() {
        for i in 1..100 {
            let f = two(i as f64 / 100.0);
            let ce = loss_value(&LossSpec::Ce, &f, 0).unwrap();
            let g0 = loss_value(&LossSpec::Gce { q: 0.0 }, &f, 0).unwrap();
            assert_eq!(ce, g0);
            let mae = loss_value(&LossSpec::Mae, &f, 0).unwrap();
            let g1 = loss_value(&LossSpec::Gce { q: 1.0 }, &f, 0).unwrap();
            assert_eq!(mae, g1);
        }
    }

    #[test]
    fn grad_prob_examples() {
        let g = loss_grad_prob(&LossSpec::Gce { q: 0.7 }, &two(0.5), 0).unwrap();
        // mpmath: -0.5^-0.3 = -1.231144413344916...
        close(g[0], -1.231_144_413_344_916, 1e-12);
        assert_eq!(g[1], 0.0);
        let f = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(loss_grad_prob(&LossSpec::Mae, &f, 2).unwrap(), vec![0.0, 0.0, -1.0]);
        let f = ProbVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(loss_grad_prob(&LossSpec::Ce, &f, 0).unwrap(), vec![-4.0, 0.0]);
        let f = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(loss_grad_prob(&LossSpec::Bs, &f, 0).unwrap(), vec![0.0, -2.0, 0.0]);
    }

    #[test]
    fn grad_logits_examples() {
        assert_eq!(
            loss_grad_logits(&LossSpec::Ce, &[0.0, 0.0], 1).unwrap(),
            vec![0.5, -0.5]
        );
        let g = loss_grad_logits(&LossSpec::Mae, &[0.0, 0.0, 0.0], 0).unwrap();
        close(g[0], -2.0 / 9.0, 1e-15);
        close(g[1], 1.0 / 9.0, 1e-15);
        close(g[2], 1.0 / 9.0, 1e-15);
        assert!(loss_grad_logits(&LossSpec::Mae, &[f64::NAN, 0.0], 0).is_err());
    }

    #[test]
    fn ce_logit_grad_matches_generic_path() {
        let z = [0.3, -1.2, 2.0, 0.1];
        let f = ProbVector::softmax(&z).unwrap();
        let mut g = vec![0.0; 4];
        LossSpec::Ce.grad_prob_into(f.as_slice(), 2, &mut g);
        let mut generic = vec![0.0; 4];
        softmax_vjp(f.as_slice(), &g, &mut generic);
        let fast = loss_grad_logits(&LossSpec::Ce, &z, 2).unwrap();
        for (a, b) in fast.iter().zip(&generic) {
            close(*a, *b, 1e-12);
        }
    }

    #[test]
    fn dal_examples() {
        let f = ProbVector::one_hot(4, 2).unwrap();
        assert_eq!(dal_loss(&f, 2, 1.5, 1.0, 4).unwrap(), 0.0);
        let mut v = vec![0.5];
        v.extend(std::iter::repeat_n(0.5 / 9.0, 9));
        let f = ProbVector::new(v).unwrap();
        // mpmath: (1 - 0.5^1.5)/1.5 + ln 2 / (1.5 ln 10) = 0.631651070047...
        close(dal_loss(&f, 0, 1.5, 1.0, 10).unwrap(), 0.631_651_070_047_138, 1e-12);
        assert!(matches!(
            dal_loss(&f, 0, 0.0, 1.0, 10),
            Err(Error::ParameterDomain { .. })
        ));
        assert!(dal_loss(&f, 0, 1.5, 1.0, 3).is_err());
    }

    #[test]
    fn weight_curve_examples() {
        assert_eq!(weight_curve(&LossSpec::Mae, &[0.1, 0.5, 0.9]).unwrap(), vec![1.0; 3]);
        close(weight_curve(&LossSpec::Gce { q: 1.5 }, &[0.25]).unwrap()[0], 0.5, 1e-15);
        close(weight_curve(&LossSpec::Ce, &[0.1]).unwrap()[0], 10.0, 1e-12);
        assert!(weight_curve(&LossSpec::Ce, &[0.0]).is_err());
    }

    #[test]
    fn js_coefficient_matches_value_derivative() {
        // d/df_y of the two-class value, by central differences.
        for pi1 in [0.1, 0.5, 0.9] {
            for fy in [0.05, 0.3, 0.7, 0.95] {
                let h = 1e-6;
                let spec = LossSpec::Js { pi1 };
                let fd = (spec.value(&[fy + h, 1.0 - fy - h], 0) - spec.value(&[fy - h, 1.0 - fy + h], 0)) / (2.0 * h);
                // On the simplex the value depends on f_y alone.
                let analytic = -js_coefficient(pi1, fy);
                close(fd, analytic, 1e-6 * analytic.abs().max(1.0));
            }
        }
    }

    #[test]
    fn parameter_domains() {
        assert!(LossSpec::Gce { q: -0.1 }.validate().is_err());
        assert!(LossSpec::Tce { t: 0 }.validate().is_err());
        assert!(LossSpec::Js { pi1: 1.0 }.validate().is_err());
        assert!(LossSpec::Js { pi1: 0.0 }.validate().is_err());
        assert!(LossSpec::Dal { q: 1.0, lambda: -1.0 }.validate().is_err());
        let f = two(0.5);
        assert!(loss_value(&LossSpec::Ce, &f, 2).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["ce", "mae", "bs", "gce:0.7", "tce:6", "js:0.5", "dal:1.5:1"] {
            let spec: LossSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<LossSpec>().unwrap(), spec);
        }
        assert!("gce".parse::<LossSpec>().is_err());
        assert!("gce:-1".parse::<LossSpec>().is_err());
        assert!("nope".parse::<LossSpec>().is_err());
    }
}
