//! Self-check suite behind the `verify` command: loss gradients against
//! finite differences, the minimizer characterizations, the excess-risk
//! bound and the schedule arithmetic.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::gradcheck::{logit_gradient_error, model_gradient_error, random_logits};
use crate::losses::{schedule_at, weight_curve, LossSpec};
use crate::prob::{ProbVector, PROB_FLOOR};
use crate::rng::{self, Rng};
use crate::theory::{
    bound_gap_estimate, excess_zero_one_risk, gce_minimizer_closed_form, pointwise_risk, unique_argmax,
    verify_onehot_minimizer, BoundSample, MirrorDescent, PointwiseRisk,
};
use crate::trainer::MlpModel;

/// Losses covered by the gradient checks.
pub fn gradient_check_losses() -> Vec<LossSpec> {
    vec![
        LossSpec::Ce,
        LossSpec::Mae,
        LossSpec::Gce { q: 0.3 },
        LossSpec::Gce { q: 0.7 },
        LossSpec::Gce { q: 1.5 },
        LossSpec::Tce { t: 2 },
        LossSpec::Tce { t: 6 },
        LossSpec::Js { pi1: 0.1 },
        LossSpec::Js { pi1: 0.5 },
        LossSpec::Js { pi1: 0.9 },
        LossSpec::Bs,
        LossSpec::Dal { q: 1.2, lambda: 0.5 },
    ]
}

/// Flat Dirichlet(1) draw on the k-simplex.
pub fn random_posterior(r: &mut Rng, k: usize) -> ProbVector {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(r)).collect();
    ProbVector::normalized(w).expect("exponential draws are positive")
}

/// Random posterior with a unique argmax.
pub fn random_untied_posterior(r: &mut Rng, k: usize) -> ProbVector {
    loop {
        let p = random_posterior(r, k);
        if unique_argmax(&p).is_ok() {
            return p;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Perturbs the closed-form minimizer so the Theorem-1 checks must fail.
    pub inject_fault: bool,
    /// Random draws per property check.
    pub samples: usize,
    /// Random (logit, label) points per loss in the gradient check.
    pub gradient_points: usize,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn standard() -> Self {
        VerifyOptions {
            inject_fault: false,
            samples: 200,
            gradient_points: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub params: String,
    /// Worst measured deviation (the check's own metric).
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: Option<String>,
}

impl CheckRecord {
    fn new(name: &str, params: String, deviation: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.to_string(),
            params,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
            note: None,
        }
    }

    fn failed(name: &str, params: String, err: impl fmt::Display) -> Self {
        CheckRecord {
            name: name.to_string(),
            params,
            deviation: f64::INFINITY,
            tolerance: 0.0,
            passed: false,
            note: Some(err.to_string()),
        }
    }
}

impl fmt::Display for CheckRecord {
    /// One logfmt line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} params=\"{}\" deviation={:e} tolerance={:e} status={}",
            self.name,
            self.params,
            self.deviation,
            self.tolerance,
            if self.passed { "pass" } else { "FAIL" }
        )?;
        if let Some(note) = &self.note {
            write!(f, " note=\"{}\"", note.replace('"', "'"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub records: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        let failed = self.failures().count();
        writeln!(f, "summary checks={} failed={}", self.records.len(), failed)
    }
}

/// Runs every check. Individual checks run in parallel; the record order
/// is fixed.
pub fn verify(opts: &VerifyOptions) -> VerifyReport {
    type Check = fn(&VerifyOptions) -> Vec<CheckRecord>;
    let checks: [Check; 8] = [
        check_logit_gradients,
        check_backprop,
        check_closed_form_spot,
        check_closed_form_vs_oracle,
        check_sharpening,
        check_onehot_collapse,
        check_bound,
        check_schedule_and_endpoints,
    ];
    let records = checks.par_iter().flat_map_iter(|c| c(opts)).collect();
    VerifyReport { records }
}

fn closed_form(opts: &VerifyOptions, p: &ProbVector, q: f64) -> Result<ProbVector> {
    let f = gce_minimizer_closed_form(p, q)?;
    if !opts.inject_fault {
        return Ok(f);
    }
    let mut v = f.into_inner();
    v[0] += 1e-2;
    ProbVector::normalized(v)
}

fn check_logit_gradients(opts: &VerifyOptions) -> Vec<CheckRecord> {
    gradient_check_losses()
        .into_par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut r = rng::stream(opts.seed, 100 + i as u64);
            let mut worst: f64 = 0.0;
            for _ in 0..opts.gradient_points {
                let k = r.random_range(2..=6);
                let z = random_logits(&mut r, k, 4.0);
                let y = r.random_range(0..k);
                match logit_gradient_error(&spec, &z, y) {
                    Ok(e) => worst = worst.max(e),
                    Err(e) => return CheckRecord::failed("gradient.logits", format!("loss={spec}"), e),
                }
            }
            CheckRecord::new(
                "gradient.logits",
                format!("loss={spec} points={}", opts.gradient_points),
                worst,
                1e-6,
            )
        })
        .collect()
}

fn check_backprop(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let params = "dims=2-16-3 points=20".to_string();
    let mut r = rng::stream(opts.seed, 200);
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let model = match MlpModel::init(&[2, 16, 3], opts.seed ^ i) {
            Ok(m) => m,
            Err(e) => return vec![CheckRecord::failed("gradient.backprop", params, e)],
        };
        let x: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut r)).collect();
        let y = r.random_range(0..3);
        let spec = gradient_check_losses()[i as usize % 12];
        match model_gradient_error(&model, &x, y, &spec) {
            Ok(e) => worst = worst.max(e),
            Err(e) => return vec![CheckRecord::failed("gradient.backprop", params, e)],
        }
    }
    vec![CheckRecord::new("gradient.backprop", params, worst, 1e-5)]
}

fn check_closed_form_spot(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let params = "posterior=(0.7,0.3) q=0.5".to_string();
    let p = ProbVector::new(vec![0.7, 0.3]).expect("valid");
    match closed_form(opts, &p, 0.5) {
        Ok(f) => {
            let expected = ProbVector::new(vec![0.844_827_586_206_896_5, 0.155_172_413_793_103_4]).expect("valid");
            vec![CheckRecord::new(
                "theorem1.spot_value",
                params,
                f.linf_distance(&expected),
                1e-5,
            )]
        }
        Err(e) => vec![CheckRecord::failed("theorem1.spot_value", params, e)],
    }
}

fn check_closed_form_vs_oracle(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let ks = [2usize, 3, 5, 10];
    let results: Vec<Result<(f64, f64, bool)>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(opts.seed, 1000 + i as u64);
            let k = ks[i % ks.len()];
            let q = 0.1 * (1 + i % 9) as f64;
            let p = random_posterior(&mut r, k);
            let clamped = p.as_slice().iter().any(|&v| v < PROB_FLOOR);
            let f = closed_form(opts, &p, q)?;
            let risk = PointwiseRisk::new(p, LossSpec::Gce { q })?;
            let oracle = MirrorDescent::default().minimize(&risk)?;
            let gap = pointwise_risk(&risk, &f)? - oracle.risk;
            Ok((f.linf_distance(&oracle.point), gap, clamped))
        })
        .collect();
    let params = format!("posteriors={} k=2,3,5,10 q=0.1..0.9", opts.samples);
    let mut linf: f64 = 0.0;
    let mut gap: f64 = f64::NEG_INFINITY;
    let mut clamped = 0;
    for res in results {
        match res {
            Ok((d, g, c)) => {
                linf = linf.max(d);
                gap = gap.max(g);
                clamped += usize::from(c);
            }
            Err(e) => {
                return vec![
                    CheckRecord::failed("theorem1.oracle_agreement", params.clone(), &e),
                    CheckRecord::failed("theorem1.risk_not_above_oracle", params, e),
                ]
            }
        }
    }
    let mut agree = CheckRecord::new("theorem1.oracle_agreement", params.clone(), linf, 1e-4);
    if clamped > 0 {
        agree.note = Some(format!("{clamped} posteriors had entries floored at {PROB_FLOOR:e}"));
    }
    vec![
        agree,
        CheckRecord::new("theorem1.risk_not_above_oracle", params, gap.max(0.0), 1e-8),
    ]
}

fn check_sharpening(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let mut r = rng::stream(opts.seed, 300);
    // Smallest margin by which the minimizer's top entry exceeds the posterior's.
    let mut worst = f64::INFINITY;
    for i in 0..opts.samples {
        let k = 2 + i % 5;
        let q = r.random_range(0.05..0.95);
        let p = random_posterior(&mut r, k);
        match closed_form(opts, &p, q) {
            Ok(f) => worst = worst.min(f.max() - p.max()),
            Err(e) => return vec![CheckRecord::failed("theorem1.sharpening", String::new(), e)],
        }
    }
    let mut rec = CheckRecord::new(
        "theorem1.sharpening",
        format!("posteriors={}", opts.samples),
        -worst,
        0.0,
    );
    rec.passed = worst > 0.0;
    vec![rec]
}

fn check_onehot_collapse(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let results: Vec<Result<f64>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(opts.seed, 5000 + i as u64);
            let k = [2usize, 3, 4, 6][i % 4];
            let p = random_untied_posterior(&mut r, k);
            // (1, 3] x (0, 2]
            let q = 3.0 - 2.0 * r.random::<f64>();
            let lambda = 2.0 - 2.0 * r.random::<f64>();
            Ok(verify_onehot_minimizer(&p, q, lambda, 1e-3)?.deviation)
        })
        .collect();
    let params = format!("posteriors={} q=(1,3] lambda=(0,2]", opts.samples);
    let mut worst: f64 = 0.0;
    for res in results {
        match res {
            Ok(d) => worst = worst.max(d),
            Err(e) => return vec![CheckRecord::failed("corollary1.onehot_collapse", params, e)],
        }
    }
    vec![CheckRecord::new("corollary1.onehot_collapse", params, worst, 1e-3)]
}

/// Clean posteriors, their image under a random row-stochastic noise
/// transition, and random classifier outputs sharpened toward a random class.
pub fn synthetic_bound_samples(r: &mut Rng, n: usize, k: usize) -> Vec<BoundSample> {
    (0..n)
        .map(|_| {
            let clean = random_posterior(r, k);
            let eta = r.random_range(0.0..0.8);
            let target = r.random_range(0..k);
            let mut noisy: Vec<f64> = clean.as_slice().iter().map(|p| (1.0 - eta) * p).collect();
            let mass: f64 = eta * clean.as_slice().iter().sum::<f64>();
            noisy[target] += mass;
            let mut out = random_posterior(r, k).into_inner();
            let pick = r.random_range(0..k);
            out[pick] += r.random_range(0.0..3.0);
            BoundSample::new(
                clean,
                ProbVector::normalized(noisy).expect("positive"),
                ProbVector::normalized(out).expect("positive"),
            )
            .expect("equal lengths")
        })
        .collect()
}

fn check_bound(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let mut r = rng::stream(opts.seed, 400);
    let samples = synthetic_bound_samples(&mut r, 10_000, 4);
    let params = "samples=10000 k=4".to_string();
    match (excess_zero_one_risk(&samples), bound_gap_estimate(&samples)) {
        (Ok(excess), Ok(bound)) => {
            let mut rec = CheckRecord::new("theorem3.bound", params, excess - bound, 0.02);
            rec.note = Some(format!("excess={excess:.4} bound={bound:.4}"));
            vec![rec]
        }
        (Err(e), _) | (_, Err(e)) => vec![CheckRecord::failed("theorem3.bound", params, e)],
    }
}

fn schedule_deviation() -> Result<f64> {
    let s = crate::losses::DalSchedule::new(150, 0.6, 1.5, 1.0)?;
    let t0 = s.t0().unwrap_or(f64::NAN);
    let v75 = schedule_at(75, 150, 0.6, 1.5, 1.0)?;
    let v150 = schedule_at(150, 150, 0.6, 1.5, 1.0)?;
    let mut worst = [
        (t0 - 200.0 / 3.0).abs(),
        (v75.q - 1.05).abs(),
        (v75.lambda - 0.1).abs(),
        (v150.lambda - 1.0).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    for t in 1..=66 {
        worst = worst.max(schedule_at(t, 150, 0.6, 1.5, 1.0)?.lambda.abs());
    }
    Ok(worst)
}

fn mae_endpoint_deviation(grid: &[f64]) -> Result<f64> {
    let a = weight_curve(&LossSpec::Gce { q: 1.0 }, grid)?;
    let b = weight_curve(&LossSpec::Mae, grid)?;
    let mut worst: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for &fy in grid {
        let f = [fy, 1.0 - fy];
        worst = worst.max((LossSpec::Gce { q: 1.0 }.value(&f, 0) - LossSpec::Mae.value(&f, 0)).abs());
    }
    Ok(worst)
}

fn check_schedule_and_endpoints(_opts: &VerifyOptions) -> Vec<CheckRecord> {
    let params = "q_s=0.6 q_e=1.5 lambda_e=1 T=150".to_string();
    let schedule = match schedule_deviation() {
        Ok(d) => CheckRecord::new("schedule.arithmetic", params, d, 1e-9),
        Err(e) => CheckRecord::failed("schedule.arithmetic", params, e),
    };

    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let ce_dev = grid
        .iter()
        .map(|&fy| {
            let f = [fy, 1.0 - fy];
            (LossSpec::Gce { q: 1e-8 }.value(&f, 0) - LossSpec::Ce.value(&f, 0)).abs()
        })
        .fold(0.0, f64::max);
    let mae = match mae_endpoint_deviation(&grid) {
        Ok(d) => CheckRecord::new("endpoints.gce_q1_is_mae", "grid=999".into(), d, 0.0),
        Err(e) => CheckRecord::failed("endpoints.gce_q1_is_mae", String::new(), e),
    };
    vec![
        schedule,
        CheckRecord::new("endpoints.gce_to_ce", "q=1e-8 grid=999".into(), ce_dev, 1e-6),
        mae,
    ]
}
