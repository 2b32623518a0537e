mod common;

use common::{exp_config, exp_dispersion};
use reflex_core::stats::{self, ks_two_sample};
use reflex_core::{
    ensemble, simulate_branching, simulate_thinning, window_counts, HawkesParams, KernelSpec, SimConfig,
};

#[test]
fn ensemble_rate_matches_stationary_rate() {
    for (k, &n) in [0.0, 0.25, 0.5, 0.75].iter().enumerate() {
        let cfg = exp_config(n, 1e5, 1e4);
        let rates = ensemble::run(100 + k as u64, 100, None, |_, seed| {
            simulate_thinning(&cfg.with_seed(seed)).unwrap().rate()
        });
        let mean = stats::mean(&rates);
        assert!((mean - 1.0).abs() < 0.02, "n={n}: mean rate {mean}");
    }
}

#[test]
fn window_count_dispersion_matches_theory() {
    let width = 200.0;
    for &n in &[0.25, 0.5, 0.75] {
        let cfg = exp_config(n, 1e5, 1e4);
        let counts: Vec<f64> = ensemble::run(7, 40, None, |_, seed| {
            window_counts(&simulate_thinning(&cfg.with_seed(seed)).unwrap(), width)
                .unwrap()
                .counts
        })
        .into_iter()
        .flatten()
        .collect();
        let ratio = stats::sample_variance(&counts) / stats::mean(&counts);
        let expected = exp_dispersion(n, 1.0, width);
        assert!(ratio > 1.0);
        assert!((ratio / expected - 1.0).abs() < 0.08, "n={n}: {ratio} vs {expected}");
    }
}

fn counts_w20(series: &reflex_core::EventSeries) -> Vec<f64> {
    window_counts(series, 20.0).unwrap().counts
}

#[test]
fn thinning_and_branching_agree_exponential() {
    let params = HawkesParams::new(0.5, KernelSpec::exponential(0.5, 1.0).unwrap()).unwrap();
    let cfg = SimConfig::new(params, 1e5, 1e4, 0);
    let p: Vec<f64> = (0..10u64)
        .map(|s| {
            let a = counts_w20(&simulate_thinning(&cfg.with_seed(2 * s)).unwrap());
            let b = counts_w20(&simulate_branching(&cfg.with_seed(2 * s + 1)).unwrap());
            ks_two_sample(&a, &b).p_value
        })
        .collect();
    let accepted = p.iter().filter(|&&p| p > 0.01).count();
    assert!(accepted >= 9, "{p:?}");
}

#[test]
fn thinning_and_branching_agree_omori() {
    let params = HawkesParams::new(0.5, KernelSpec::omori(0.5, 0.35, 1.0).unwrap()).unwrap();
    let cfg = SimConfig::new(params, 1e4, 1e3, 0);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in 0..6u64 {
        a.extend(counts_w20(&simulate_thinning(&cfg.with_seed(2 * s)).unwrap()));
        b.extend(counts_w20(&simulate_branching(&cfg.with_seed(2 * s + 1)).unwrap()));
    }
    let ks = ks_two_sample(&a, &b);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn near_critical_omori_relaxes_slowly() {
    let params = HawkesParams::new(0.01, KernelSpec::omori(0.99, 0.35, 1.0).unwrap()).unwrap();
    let rates: Vec<f64> = [1e4, 1e5, 1e6]
        .iter()
        .map(|&t| {
            let cfg = SimConfig::new(params, t, 0.0, 0);
            stats::mean(&ensemble::run(11, 20, None, |_, seed| {
                simulate_branching(&cfg.with_seed(seed)).unwrap().rate()
            }))
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[0] < w[1]), "{rates:?}");
    assert!(rates[2] < 1.0, "{rates:?}");
}
