use std::hint::black_box;

use clrar_core::distributions::{RngStream, TruncatedNormal, TruncationSide};
use clrar_core::model::{complete_log_likelihood, InterceptMode, QTransform};
use clrar_core::sampler::{run_gda_msm, McmcConfig, ModelSpec};
use clrar_core::simstudy::{simulate_replication, Scenario, SimModel};
use criterion::{criterion_group, criterion_main, Criterion};

criterion_group!(benches, transform, truncated_normal, sweep);
criterion_main!(benches);

fn transform(c: &mut Criterion) {
    let data = simulate_replication(&Scenario::new(SimModel::M2, 0.48, 0.2, 1000), 0).unwrap();
    let z = data.latent.clone();
    let q = QTransform::new(&[0.5, 0.2], InterceptMode::Transformed).unwrap();
    c.bench_function("q_apply_t1000_p2", |b| b.iter(|| black_box(q.apply(black_box(&z)))));
    c.bench_function("log_likelihood_t1000", |b| {
        b.iter(|| black_box(complete_log_likelihood(&data.truth, black_box(&z), &data.design).unwrap()))
    });
}

fn truncated_normal(c: &mut Criterion) {
    let mut rng = RngStream::new(1, 0);
    let body = TruncatedNormal::new(0.0, 1.0, 0.5, TruncationSide::UpperBounded).unwrap();
    let tail = TruncatedNormal::new(10.0, 1.0, 2.0, TruncationSide::UpperBounded).unwrap();
    c.bench_function("truncated_normal_body", |b| b.iter(|| black_box(body.sample(&mut rng))));
    c.bench_function("truncated_normal_tail", |b| b.iter(|| black_box(tail.sample(&mut rng))));
}

fn sweep(c: &mut Criterion) {
    let data = simulate_replication(&Scenario::new(SimModel::M2, 0.48, 0.2, 500), 0).unwrap();
    let config = McmcConfig { iterations: 1000, burn_in: 500, thin: 10, ..McmcConfig::default() };
    let mut group = c.benchmark_group("gda_msm");
    group.sample_size(10);
    group.bench_function("t500_1000_sweeps", |b| {
        b.iter(|| black_box(run_gda_msm(&data.series, &data.design, &ModelSpec::ar(1), &config).unwrap()))
    });
    group.finish();
}
