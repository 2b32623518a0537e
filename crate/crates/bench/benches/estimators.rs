use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use reflex_core::mle::MleOptions;
use reflex_core::{
    bootstrap_ci, estimate_branching, fit_mle_exp, log_likelihood_exp, log_likelihood_naive, simulate_branching,
    simulate_thinning, window_counts, ExpTheta, HawkesParams, KernelSpec, SimConfig,
};
use std::hint::black_box;

fn exp_config(horizon: f64) -> SimConfig {
    SimConfig::new(HawkesParams::exponential_with_rate(0.75, 1.0, 1.0).unwrap(), horizon, 0.0, 7)
}

fn likelihood(c: &mut Criterion) {
    let theta = ExpTheta::new(0.25, 0.75, 1.0);
    let mut group = c.benchmark_group("log_likelihood");
    for horizon in [1e3, 4e3] {
        let series = simulate_thinning(&exp_config(horizon)).unwrap();
        let n = series.len();
        group.bench_with_input(BenchmarkId::new("recursive", n), &series, |b, s| {
            b.iter(|| log_likelihood_exp(black_box(&theta), s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("naive", n), &series, |b, s| {
            b.iter(|| log_likelihood_naive(black_box(&theta), s).unwrap())
        });
    }
    group.finish();

    let series = simulate_thinning(&exp_config(1e4)).unwrap();
    c.bench_function("fit_mle_exp/1e4", |b| {
        b.iter(|| fit_mle_exp(black_box(&series), None, &MleOptions::default()).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    let exp = exp_config(1e5);
    group.bench_function("thinning_exponential", |b| b.iter(|| simulate_thinning(black_box(&exp)).unwrap()));
    group.bench_function("branching_exponential", |b| b.iter(|| simulate_branching(black_box(&exp)).unwrap()));
    let omori = SimConfig::new(
        HawkesParams::new(0.5, KernelSpec::omori(0.5, 0.35, 1.0).unwrap()).unwrap(),
        1e4,
        0.0,
        7,
    );
    group.bench_function("thinning_omori", |b| b.iter(|| simulate_thinning(black_box(&omori)).unwrap()));
    group.bench_function("branching_omori", |b| b.iter(|| simulate_branching(black_box(&omori)).unwrap()));
    group.finish();
}

fn estimation(c: &mut Criterion) {
    let series = simulate_thinning(&exp_config(1e5)).unwrap();
    c.bench_function("window_counts/W=20", |b| b.iter(|| window_counts(black_box(&series), 20.0).unwrap()));
    let counts = window_counts(&series, 20.0).unwrap();
    c.bench_function("estimate_branching/W=20", |b| b.iter(|| estimate_branching(black_box(&counts)).unwrap()));
    c.bench_function("bootstrap_ci/B=1000", |b| {
        b.iter(|| bootstrap_ci(black_box(&counts), 1000, (0.1, 0.9), 3).unwrap())
    });
}

criterion_group!(benches, likelihood, simulation, estimation);
criterion_main!(benches);
