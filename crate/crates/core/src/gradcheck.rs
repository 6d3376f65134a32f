//! Central finite differences, used as an independent check on analytic
//! gradients.

use crate::error::Result;
use crate::losses::LossSpec;
use crate::prob::softmax_into;
use crate::trainer::MlpModel;

/// Step for logit checks. With the fourth-order stencil the truncation
/// error at this step is far below rounding noise.
pub const FD_STEP: f64 = 1e-4;

/// Step for parameter checks; smaller so the stencil rarely straddles a
/// ReLU kink.
pub const FD_STEP_MODEL: f64 = 1e-5;

/// Smallest gap between the two largest logits accepted by
/// [`random_logits`]. Closer pairs put the argmax kink of BS and DAL inside
/// the finite-difference stencil.
pub const MIN_TOP_GAP: f64 = 1e-3;

/// Fourth-order central-difference gradient of `f` at `x` with step `h`:
/// `(-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h` per coordinate.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut at = |probe: &mut Vec<f64>, i: usize, offset: f64| {
        probe[i] = x[i] + offset;
        let v = f(probe);
        probe[i] = x[i];
        v
    };
    (0..x.len())
        .map(|i| {
            let (p2, p1) = (at(&mut probe, i, 2.0 * h), at(&mut probe, i, h));
            let (m1, m2) = (at(&mut probe, i, -h), at(&mut probe, i, -2.0 * h));
            (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||, 1e-8)` in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(1e-8);
    diff / scale
}

/// Relative error between the analytic logit gradient of `spec` at `(z, y)`
/// and central differences of the loss through the softmax.
pub fn logit_gradient_error(spec: &LossSpec, z: &[f64], y: usize) -> Result<f64> {
    let analytic = crate::losses::loss_grad_logits(spec, z, y)?;
    let mut f = vec![0.0; z.len()];
    let numeric = central_diff(
        |zz| {
            softmax_into(zz, &mut f);
            spec.value(&f, y)
        },
        z,
        FD_STEP,
    );
    Ok(relative_error(&analytic, &numeric))
}

/// Relative error between backprop and central differences over every
/// parameter of `model` for the loss at a single example.
pub fn model_gradient_error(model: &MlpModel, x: &[f64], y: usize, spec: &LossSpec) -> Result<f64> {
    let (logits, _) = model.forward(x)?;
    let analytic = crate::losses::loss_grad_logits(spec, &logits, y)?;
    let grads = model.backward(x, &analytic)?.to_flat();
    let mut probe = model.clone();
    let mut fail = None;
    let numeric = central_diff(
        |theta| {
            if let Err(e) = probe.set_flat(theta) {
                fail = Some(e);
                return 0.0;
            }
            match probe.forward(x) {
                Ok((_, p)) => spec.value(p.as_slice(), y),
                Err(e) => {
                    fail = Some(e);
                    0.0
                }
            }
        },
        &model.to_flat(),
        FD_STEP_MODEL,
    );
    if let Some(e) = fail {
        return Err(e);
    }
    Ok(relative_error(&grads, &numeric))
}

/// Uniform logits in `[-bound, bound]` whose two largest entries differ by
/// at least [`MIN_TOP_GAP`].
pub fn random_logits(r: &mut impl rand::Rng, k: usize, bound: f64) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..k).map(|_| r.random_range(-bound..bound)).collect();
        let mut sorted = z.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted[0] - sorted[1] >= MIN_TOP_GAP {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = central_diff(|x| x[0] * x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0], 1e-3);
        assert!(relative_error(&g, &[12.0, 3.0]) < 1e-11);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
    }
}
