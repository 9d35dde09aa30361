use criterion::{black_box, criterion_group, criterion_main, Criterion};

use covar_core::analytic::qre_fit;
use covar_core::analytic::{
    sample_linear, sample_nonlinear, LinearPortfolioSpec, NonlinearPortfolioSpec,
};
use covar_core::dgmodel::{appendix_h_fixture, sample_losses, TailSpec};
use covar_core::estimators::{batching_estimate, is_estimate, is_scenario, BatchConfig, IsConfig};
use covar_core::numerics::RngStream;

pub fn fixture_sampling(c: &mut Criterion) {
    let model = appendix_h_fixture();
    let mut group = c.benchmark_group("sample_losses");
    group.bench_function("normal n=10000", |b| {
        let mut stream = RngStream::new(7, 0);
        b.iter(|| sample_losses(&model, TailSpec::Normal, &mut stream, 10_000).unwrap())
    });
    group.bench_function("student-t n=10000", |b| {
        let mut stream = RngStream::new(7, 1);
        b.iter(|| sample_losses(&model, TailSpec::StudentT { nu: 6 }, &mut stream, 10_000).unwrap())
    });
    group.finish();
}

pub fn batching(c: &mut Criterion) {
    let spec = LinearPortfolioSpec::default();
    let sample = sample_linear(&spec, &mut RngStream::new(7, 0), 40_000).unwrap();
    let cfg = BatchConfig::new(200, 200).unwrap();
    c.bench_function("batching_estimate n=40000 k=m=200", |b| {
        b.iter(|| batching_estimate(black_box(&sample), &cfg, 0.95, 0.95).unwrap())
    });
}

pub fn importance(c: &mut Criterion) {
    let model = appendix_h_fixture();
    let cfg = IsConfig::new(10_000, 10_000, 10).unwrap();
    let stream = RngStream::new(7, 0);
    let mut group = c.benchmark_group("importance");
    group.sample_size(20);
    group.bench_function("is_estimate n=20000", |b| {
        b.iter(|| is_estimate(&model, TailSpec::Normal, &cfg, 0.95, 0.95, 0.95, &stream).unwrap())
    });
    group.finish();
}

pub fn scenario_kernel(c: &mut Criterion) {
    let model = appendix_h_fixture();
    let mut stream = RngStream::new(7, 0);
    c.bench_function("is_scenario", |b| {
        b.iter(|| is_scenario(&model, TailSpec::Normal, black_box(1.53), &mut stream).unwrap())
    });
}

pub fn quantile_regression(c: &mut Criterion) {
    let spec = NonlinearPortfolioSpec::default();
    let sample = sample_nonlinear(&spec, &mut RngStream::new(7, 0), 10_000).unwrap();
    let mut group = c.benchmark_group("qre");
    group.sample_size(20);
    group.bench_function("qre_fit n=10000", |b| {
        b.iter(|| qre_fit(black_box(&sample), 0.95).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    fixture_sampling,
    batching,
    importance,
    scenario_kernel,
    quantile_regression,
);
criterion_main!(benches);
