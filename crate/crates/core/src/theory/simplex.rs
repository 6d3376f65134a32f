//! Numerical risk minimization on the probability simplex.
//!
//! Exponentiated-gradient (entropic mirror descent) iterations with restarts
//! from the centroid and from near each vertex. For `k <= 3` a dense grid
//! double-checks the result, since for `q > 1` the risk is concave along
//! edges and gradient steps alone can stall near the centroid.

use serde::Serialize;

use super::PointwiseRisk;
use crate::error::{Error, Result};
use crate::prob::ProbVector;

#[derive(Clone, Copy, Debug)]
pub struct MirrorDescent {
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the simplex KKT residual `max_i x_i |g_i - <x, g>|` is below this.
    pub tol: f64,
    /// Grid spacing of the certificate used when `k <= 3`.
    pub grid_spacing: f64,
}

impl Default for MirrorDescent {
    fn default() -> Self {
        MirrorDescent {
            step: 0.1,
            max_iters: 100_000,
            tol: 1e-10,
            grid_spacing: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimplexMinimum {
    pub point: ProbVector,
    pub risk: f64,
    pub residual: f64,
    /// Iterations spent by the restart that produced `point`.
    pub iterations: usize,
    pub restarts: usize,
}

struct Run {
    x: Vec<f64>,
    risk: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

impl MirrorDescent {
    pub fn minimize(&self, risk: &PointwiseRisk) -> Result<SimplexMinimum> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::domain(
                "tol",
                format!("tolerance must be positive, got {}", self.tol),
            ));
        }
        risk.spec().validate()?;
        let k = risk.k();
        let mut starts = vec![vec![1.0 / k as f64; k]];
        for v in 0..k {
            let mut x = vec![0.1 / k as f64; k];
            x[v] += 0.9;
            starts.push(x);
        }
        let mut restarts = starts.len();
        let mut best = starts
            .into_iter()
            .map(|x| self.run(risk, x))
            .min_by(|a, b| a.risk.total_cmp(&b.risk))
            .expect("at least one start");

        if k <= 3 {
            let (grid_x, grid_risk) = grid_minimum(risk, self.grid_spacing);
            if best.risk > grid_risk + self.tol {
                // Polish from the grid point, nudged into the interior.
                let start: Vec<f64> = grid_x.iter().map(|v| 0.999 * v + 0.001 / k as f64).collect();
                let polished = self.run(risk, start);
                restarts += 1;
                if polished.risk < best.risk {
                    best = polished;
                }
            }
            if best.risk > grid_risk + self.tol {
                return Err(Error::ConvergenceFailure {
                    best: ProbVector::normalized(best.x)?,
                    residual: best.residual,
                    iterations: best.iterations,
                });
            }
        }

        if !best.converged {
            return Err(Error::ConvergenceFailure {
                best: ProbVector::normalized(best.x)?,
                residual: best.residual,
                iterations: best.iterations,
            });
        }
        Ok(SimplexMinimum {
            point: ProbVector::normalized(best.x)?,
            risk: best.risk,
            residual: best.residual,
            iterations: best.iterations,
            restarts,
        })
    }

    fn run(&self, risk: &PointwiseRisk, mut x: Vec<f64>) -> Run {
        let k = x.len();
        let mut g = vec![0.0; k];
        let mut scratch = vec![0.0; k];
        let mut residual = f64::INFINITY;
        for it in 0..self.max_iters {
            risk.gradient_into(&x, &mut g, &mut scratch);
            let dot: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
            residual = x
                .iter()
                .zip(&g)
                .map(|(xi, gi)| xi * (gi - dot).abs())
                .fold(0.0, f64::max);
            if residual < self.tol {
                return Run {
                    risk: risk.value_raw(&x),
                    x,
                    residual,
                    iterations: it,
                    converged: true,
                };
            }
            let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
            let mut sum = 0.0;
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi *= (-self.step * (gi - g_min)).exp();
                sum += *xi;
            }
            x.iter_mut().for_each(|xi| *xi /= sum);
        }
        Run {
            risk: risk.value_raw(&x),
            x,
            residual,
            iterations: self.max_iters,
            converged: false,
        }
    }
}

/// Lowest risk over the lattice `{x : x_i = n_i * spacing, sum x_i = 1}`.
fn grid_minimum(risk: &PointwiseRisk, spacing: f64) -> (Vec<f64>, f64) {
    let steps = (1.0 / spacing).round() as usize;
    let k = risk.k();
    let mut best = (vec![1.0 / k as f64; k], f64::INFINITY);
    let mut visit = |x: Vec<f64>| {
        let r = risk.value_raw(&x);
        if r < best.1 {
            best = (x, r);
        }
    };
    match k {
        2 => {
            for i in 0..=steps {
                let a = i as f64 / steps as f64;
                visit(vec![a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 / steps as f64;
                    let b = j as f64 / steps as f64;
                    visit(vec![a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        _ => {}
    }
    best
}

/// Minimizes a pointwise risk over the simplex with the default oracle
/// settings, stopping at KKT residual `tol`.
pub fn minimize_risk_on_simplex(risk: &PointwiseRisk, tol: f64, max_iters: usize) -> Result<ProbVector> {
    let oracle = MirrorDescent {
        tol,
        max_iters,
        ..MirrorDescent::default()
    };
    Ok(oracle.minimize(risk)?.point)
}
