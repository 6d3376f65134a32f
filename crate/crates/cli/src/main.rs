//! `dal`: run experiments, sweeps, weight curves and the verification suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dal_core::harness::{self, ExperimentConfig, SweepParam, VerifyOptions};
use dal_core::{Error, LossSpec};

#[derive(Parser)]
#[command(name = "dal", version, about = "Noisy-label loss experiments on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write metrics.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a configuration once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of q_s, q_e, lambda_e, eta, lr0, q.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Print |dL/df_y| over a grid of f_y as CSV.
    Curves {
        /// Loss specs such as ce, mae, gce:0.7, tce:6, js:0.5, bs, dal:1.2:0.5.
        #[arg(long, value_delimiter = ',', required = true)]
        losses: Vec<String>,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check gradients and the minimizer properties; exits 1 on any failure.
    Verify {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        gradient_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_configuration() {
            Failure::Config(e.into())
        } else {
            Failure::Run(e.into())
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))
        .map_err(Failure::Config)
}

fn write_out(text: &str, output: Option<PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => harness::write_atomic(&path, text.as_bytes()).map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let art = harness::run_experiment(&cfg)?;
            let s = &art.summary;
            println!(
                "final_test_acc={} best_test_acc={} best_epoch={} train_acc_clean={} train_acc_noisy={} wall_time_secs={:.2}",
                s.final_test_acc, s.best_test_acc, s.best_epoch, s.final_train_acc_clean, s.final_train_acc_noisy, s.wall_time_secs
            );
            println!("wrote {} and {}", art.metrics_csv.display(), art.summary_json.display());
        }
        Command::Sweep { config, param, values } => {
            let cfg = load(&config)?;
            let param: SweepParam = param.parse()?;
            let (report, path) = harness::sweep(&cfg, param, &values)?;
            print!("{}", report.to_csv());
            println!("spread={} wrote {}", report.spread(), path.display());
        }
        Command::Curves {
            losses,
            resolution,
            output,
        } => {
            let specs = losses
                .iter()
                .map(|s| s.parse::<LossSpec>())
                .collect::<Result<Vec<_>, _>>()?;
            write_out(&harness::curves_csv(&specs, resolution)?, output)?;
        }
        Command::Verify {
            samples,
            gradient_points,
            seed,
            inject_fault,
        } => {
            let report = harness::verify(&VerifyOptions {
                inject_fault,
                samples,
                gradient_points,
                seed,
            });
            print!("{report}");
            if !report.all_passed() {
                let names: Vec<&str> = report.failures().map(|r| r.name.as_str()).collect();
                return Err(Failure::Run(anyhow::anyhow!("failed checks: {}", names.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
    }
}
