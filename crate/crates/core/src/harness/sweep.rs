//! One-parameter sensitivity sweeps.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, run_in_memory, write_atomic, RunOutcome};
use crate::error::{Error, Result};
use crate::trainer::LossSchedule;

pub const SWEEP_HEADER: &str = "value,final_test_acc,best_test_acc";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    QS,
    QE,
    LambdaE,
    Eta,
    Lr0,
    /// Exponent of a static GCE loss.
    Q,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::QS => "q_s",
            SweepParam::QE => "q_e",
            SweepParam::LambdaE => "lambda_e",
            SweepParam::Eta => "eta",
            SweepParam::Lr0 => "lr0",
            SweepParam::Q => "q",
        }
    }

    /// Copy of `template` with this parameter set to `value`.
    pub fn apply(self, template: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = template.clone();
        match (self, &mut cfg.loss) {
            (SweepParam::QS, LossSchedule::Dal { q_s, .. }) => *q_s = value,
            (SweepParam::QE, LossSchedule::Dal { q_e, .. }) => *q_e = value,
            (SweepParam::LambdaE, LossSchedule::Dal { lambda_e, .. }) => *lambda_e = value,
            (SweepParam::Q, LossSchedule::Gce { q }) => *q = value,
            (SweepParam::Eta, _) => cfg.noise.eta = value,
            (SweepParam::Lr0, _) => cfg.optimizer.lr0 = value,
            (p, _) => {
                return Err(Error::Configuration(format!(
                    "parameter {} does not apply to this config's loss",
                    p.name()
                )))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "q_s" => SweepParam::QS,
            "q_e" => SweepParam::QE,
            "lambda_e" => SweepParam::LambdaE,
            "eta" => SweepParam::Eta,
            "lr0" => SweepParam::Lr0,
            "q" => SweepParam::Q,
            other => {
                return Err(Error::Configuration(format!(
                    "unknown sweep parameter {other:?} (expected q_s, q_e, lambda_e, eta, lr0 or q)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub final_test_acc: f64,
    pub best_test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// max - min of final test accuracy across values.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.final_test_acc), hi.max(r.final_test_acc))
            });
        hi - lo
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            writeln!(s, "{},{},{}", r.value, r.final_test_acc, r.best_test_acc).expect("writing to a String");
        }
        s
    }
}

fn member_configs(template: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(Error::Configuration("sweep needs at least one value".into()));
    }
    values.iter().map(|&v| param.apply(template, v)).collect()
}

fn row(value: f64, outcome: &RunOutcome) -> SweepRow {
    SweepRow {
        value,
        final_test_acc: outcome.final_test_acc(),
        best_test_acc: outcome.best_test_acc().0,
    }
}

/// Runs every member in parallel without writing files. Seeds are those of
/// the template, so members differ only in the swept parameter.
pub fn sweep_in_memory(
    template: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<(SweepReport, Vec<RunOutcome>)> {
    let configs = member_configs(template, param, values)?;
    let outcomes = configs.par_iter().map(run_in_memory).collect::<Result<Vec<_>>>()?;
    let rows = values.iter().zip(&outcomes).map(|(&v, o)| row(v, o)).collect();
    Ok((SweepReport { param, rows }, outcomes))
}

/// Runs the sweep, giving each member the subdirectory `<param>=<value>` of
/// the template's output directory, and writes `sweep.csv` beside them.
pub fn sweep(template: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<(SweepReport, PathBuf)> {
    let mut configs = member_configs(template, param, values)?;
    for (cfg, v) in configs.iter_mut().zip(values) {
        cfg.output_dir = template.output_dir.join(format!("{}={v}", param.name()));
    }
    let artifacts = configs.par_iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    let rows = values
        .iter()
        .zip(&artifacts)
        .map(|(&value, a)| SweepRow {
            value,
            final_test_acc: a.summary.final_test_acc,
            best_test_acc: a.summary.best_test_acc,
        })
        .collect();
    let report = SweepReport { param, rows };
    let dir = template.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(SWEEP_FILE);
    write_atomic(&path, report.to_csv().as_bytes())?;
    Ok((report, path))
}
