#![allow(dead_code)]

use reflex_core::stats;
use reflex_core::{ensemble, HawkesParams, SimConfig};

/// `Var(N_W) / (Λ W)` for a stationary exponential Hawkes process, with
/// `γ = β(1 − n)` the decay rate of the autocovariance.
pub fn exp_dispersion(n: f64, beta: f64, width: f64) -> f64 {
    let x = beta * (1.0 - n) * width;
    let captured = 1.0 - (1.0 - (-x).exp()) / x;
    1.0 + (1.0 / (1.0 - n).powi(2) - 1.0) * captured
}

/// Large-sample value of `ñ` at window `W`.
pub fn exp_n_tilde(n: f64, beta: f64, width: f64) -> f64 {
    1.0 - exp_dispersion(n, beta, width).powf(-0.5)
}

pub fn exp_config(n: f64, horizon: f64, burn_in: f64) -> SimConfig {
    let params = HawkesParams::exponential_with_rate(n, 1.0, 1.0).unwrap();
    SimConfig::new(params, horizon, burn_in, 0)
}

pub fn ensemble_median<F>(master: u64, count: usize, job: F) -> f64
where
    F: Fn(usize, u64) -> f64 + Sync + Send,
{
    stats::median(&ensemble::run(master, count, None, job)).unwrap()
}
