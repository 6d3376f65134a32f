use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dal_core::harness::NoisyDataset;
use dal_core::losses::{loss_grad_logits, LossSpec};
use dal_core::theory::{MirrorDescent, PointwiseRisk};
use dal_core::trainer::train;
use dal_core::{DatasetSpec, LabelNoiseSpec, LossSchedule, MlpModel, OptimizerConfig, ProbVector};

fn loss_gradients(c: &mut Criterion) {
    let z = [0.3, -1.2, 2.0, 0.1, -0.4, 0.9, 1.1, -2.0, 0.0, 0.5];
    let mut group = c.benchmark_group("grad_logits_k10");
    for spec in [
        LossSpec::Ce,
        LossSpec::Gce { q: 0.7 },
        LossSpec::Tce { t: 6 },
        LossSpec::Js { pi1: 0.5 },
        LossSpec::Dal { q: 1.2, lambda: 0.5 },
    ] {
        group.bench_function(spec.to_string(), |b| {
            b.iter(|| loss_grad_logits(&spec, black_box(&z), 3))
        });
    }
    group.finish();
}

fn simplex_oracle(c: &mut Criterion) {
    let p = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    let gce = PointwiseRisk::new(p.clone(), LossSpec::Gce { q: 0.5 }).unwrap();
    let dal = PointwiseRisk::new(p, LossSpec::Dal { q: 1.5, lambda: 1.0 }).unwrap();
    let md = MirrorDescent::default();
    c.bench_function("mirror_descent/gce_q0.5_k3", |b| {
        b.iter(|| md.minimize(black_box(&gce)).unwrap())
    });
    c.bench_function("mirror_descent/dal_q1.5_k3", |b| {
        b.iter(|| md.minimize(black_box(&dal)).unwrap())
    });
}

fn training_epoch(c: &mut Criterion) {
    let data = NoisyDataset::build(&DatasetSpec::default(), &LabelNoiseSpec::symmetric(0.4, 0)).unwrap();
    let opt = OptimizerConfig {
        epochs: 1,
        ..OptimizerConfig::default()
    };
    let model = MlpModel::init(&[2, 64, 64, 4], 0).unwrap();
    let schedule = LossSchedule::Dal {
        q_s: 0.6,
        q_e: 1.5,
        lambda_e: 1.0,
    };
    c.bench_function("train_epoch/blobs_2000_mlp_64x64", |b| {
        b.iter_batched(
            || model.clone(),
            |mut m| train(&mut m, &data, &schedule, &opt).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, loss_gradients, simplex_oracle, training_epoch);
criterion_main!(benches);
