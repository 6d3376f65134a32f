//! Pointwise risks and the minimizer characterizations for GCE and GCE+BS.
//!
//! * For `0 < q < 1` the GCE risk minimizer is the posterior raised to the
//!   power `1/(1 - q)` and renormalized ([`gce_minimizer_closed_form`]).
//! * For `q > 1` (with or without a positive bootstrapping weight) the
//!   minimizer is the one-hot vector at the posterior's argmax
//!   ([`verify_onehot_minimizer`]).
//! * The excess 0-1 risk of any classifier is bounded by the fraction of
//!   inputs where clean and noisy argmaxes disagree or the classifier puts
//!   at most 1/2 on the noisy argmax ([`bound_gap_estimate`]).

mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::prob::{argmax, ProbVector, PROB_FLOOR};

pub use simplex::{minimize_risk_on_simplex, MirrorDescent, SimplexMinimum};

/// `R_L(f) = sum_y p(y) L(f, y)` for a fixed posterior `p`.
#[derive(Clone, Debug)]
pub struct PointwiseRisk {
    posterior: ProbVector,
    spec: LossSpec,
}

impl PointwiseRisk {
    pub fn new(posterior: ProbVector, spec: LossSpec) -> Result<Self> {
        spec.validate()?;
        Ok(PointwiseRisk { posterior, spec })
    }

    pub fn posterior(&self) -> &ProbVector {
        &self.posterior
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.posterior.k()
    }

    pub(crate) fn value_raw(&self, f: &[f64]) -> f64 {
        self.posterior
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(y, &p)| p * self.spec.value(f, y))
            .sum()
    }

    pub(crate) fn gradient_into(&self, f: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for (y, &p) in self.posterior.as_slice().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.spec.grad_prob_into(f, y, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += p * s;
            }
        }
    }
}

pub fn pointwise_risk(risk: &PointwiseRisk, f: &ProbVector) -> Result<f64> {
    if f.k() != risk.k() {
        return Err(Error::DimensionMismatch {
            expected: risk.k(),
            actual: f.k(),
        });
    }
    Ok(risk.value_raw(f.as_slice()))
}

/// GCE risk minimizer for `0 < q < 1`: `p_i^(1/(1-q)) / sum_j p_j^(1/(1-q))`.
///
/// Posterior entries are floored at 1e-12 before taking logs.
pub fn gce_minimizer_closed_form(posterior: &ProbVector, q: f64) -> Result<ProbVector> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("q", format!("closed form needs 0 < q < 1, got {q}")));
    }
    let a = 1.0 / (1.0 - q);
    let logs: Vec<f64> = posterior
        .as_slice()
        .iter()
        .map(|p| a * p.max(PROB_FLOOR).ln())
        .collect();
    ProbVector::softmax(&logs)
}

/// Outcome of [`verify_onehot_minimizer`].
#[derive(Clone, Debug, Serialize)]
pub struct OnehotWitness {
    pub holds: bool,
    /// Numerical minimizer of the GCE + lambda * BS risk.
    pub minimizer: ProbVector,
    /// L-infinity distance from `minimizer` to the one-hot target.
    pub deviation: f64,
    pub target_class: usize,
}

/// Checks numerically that the GCE(q) + lambda BS risk (bootstrapping term
/// normalized by `q ln k`) is minimized by the one-hot vector at the
/// posterior's argmax.
pub fn verify_onehot_minimizer(posterior: &ProbVector, q: f64, lambda: f64, tol: f64) -> Result<OnehotWitness> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::domain("q", format!("one-hot collapse needs q > 1, got {q}")));
    }
    let target_class = unique_argmax(posterior)?;
    let risk = PointwiseRisk::new(posterior.clone(), LossSpec::Dal { q, lambda })?;
    let minimizer = MirrorDescent::default().minimize(&risk)?.point;
    let target = ProbVector::one_hot(posterior.k(), target_class)?;
    let deviation = minimizer.linf_distance(&target);
    Ok(OnehotWitness {
        holds: deviation <= tol,
        minimizer,
        deviation,
        target_class,
    })
}

/// Argmax of a posterior, rejecting ties (within 1e-12).
pub fn unique_argmax(p: &ProbVector) -> Result<usize> {
    let m = p.argmax();
    let ties = p.as_slice().iter().filter(|&&v| p[m] - v <= 1e-12).count();
    if ties > 1 {
        return Err(Error::DegenerateInput(format!(
            "posterior argmax is tied between {ties} classes"
        )));
    }
    Ok(m)
}

/// Clean posterior, noisy posterior and classifier output at one input.
#[derive(Clone, Debug, Serialize)]
pub struct BoundSample {
    pub clean_posterior: ProbVector,
    pub noisy_posterior: ProbVector,
    pub f_out: ProbVector,
}

impl BoundSample {
    pub fn new(clean_posterior: ProbVector, noisy_posterior: ProbVector, f_out: ProbVector) -> Result<Self> {
        let k = clean_posterior.k();
        for v in [&noisy_posterior, &f_out] {
            if v.k() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: v.k(),
                });
            }
        }
        Ok(BoundSample {
            clean_posterior,
            noisy_posterior,
            f_out,
        })
    }

    /// Whether the clean and noisy argmaxes agree and `f` puts more than 1/2
    /// on that class.
    pub fn certified(&self) -> bool {
        let y_clean = self.clean_posterior.argmax();
        let y_noisy = self.noisy_posterior.argmax();
        y_clean == y_noisy && self.f_out[y_noisy] > 0.5
    }

    /// `max_y p(y) - p(argmax f)`: the classifier's excess 0-1 risk here.
    pub fn excess_risk(&self) -> f64 {
        self.clean_posterior.max() - self.clean_posterior[self.f_out.argmax()]
    }
}

/// Upper bound on the excess 0-1 risk: one minus the fraction of certified
/// samples. The GCE+BS minimizer puts mass 1 on the noisy argmax, so the
/// margin threshold is `1 - 1/2`.
pub fn bound_gap_estimate(samples: &[BoundSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let hits = samples.iter().filter(|s| s.certified()).count();
    Ok(1.0 - hits as f64 / samples.len() as f64)
}

/// Mean excess 0-1 risk over samples (the left side of the bound).
pub fn excess_zero_one_risk(samples: &[BoundSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    Ok(samples.iter().map(BoundSample::excess_risk).sum::<f64>() / samples.len() as f64)
}

/// Fraction of outputs whose argmax (lowest index on ties) differs from the label.
pub fn zero_one_risk(f_outputs: &[ProbVector], labels: &[usize]) -> Result<f64> {
    if f_outputs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: f_outputs.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("no examples".into()));
    }
    let wrong = f_outputs
        .iter()
        .zip(labels)
        .filter(|(f, &y)| argmax(f.as_slice()) != y)
        .count();
    Ok(wrong as f64 / labels.len() as f64)
}
