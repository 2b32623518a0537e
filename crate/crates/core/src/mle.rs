//! Maximum-likelihood fitting of the exponential-kernel Hawkes model.
//!
//! For `θ = (μ, α, β)` and events on `[t0, T]` the log-likelihood is
//!
//! ```text
//! log L = −μ(T − t0) − (α/β) Σ_i (1 − e^{−β(T − t_i)}) + Σ_i log(μ + α A_i)
//! A_1 = 0,  A_i = e^{−β(t_i − t_{i−1})} (1 + A_{i−1})
//! ```
//!
//! The fit maximizes it with a Nelder–Mead search over
//! `(ln μ, ln α, ln β)` from several starting points and keeps the best.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::series::{jitter_ties, EventSeries};

pub const MIN_FIT_EVENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTheta {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ExpTheta {
    pub fn new(mu: f64, alpha: f64, beta: f64) -> Self {
        Self { mu, alpha, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu >= 0.0 && self.alpha >= 0.0 && self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "need mu >= 0, alpha >= 0, beta > 0, got {self:?}"
            )))
        }
    }

    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.beta
    }

    fn to_log(self) -> [f64; 3] {
        [self.mu.ln(), self.alpha.ln(), self.beta.ln()]
    }

    fn from_log(x: &[f64]) -> Self {
        Self::new(x[0].exp(), x[1].exp(), x[2].exp())
    }
}

fn compensator(theta: &ExpTheta, events: &EventSeries) -> f64 {
    let h = events.horizon();
    let decay: f64 = events
        .times()
        .iter()
        .map(|&t| -(-theta.beta * (h.end - t)).exp_m1())
        .sum();
    theta.mu * h.len() + theta.alpha / theta.beta * decay
}

/// Exact log-likelihood by the O(N) recursion. Returns `−∞` when some
/// event has zero intensity (only possible with `μ = 0`).
pub fn log_likelihood_exp(theta: &ExpTheta, events: &EventSeries) -> Result<f64> {
    theta.validate()?;
    let times = events.times();
    let mut excitation = 0.0;
    let mut log_sum = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            excitation = (-theta.beta * (t - times[i - 1])).exp() * (1.0 + excitation);
        }
        let intensity = theta.mu + theta.alpha * excitation;
        if intensity <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_sum += intensity.ln();
    }
    Ok(log_sum - compensator(theta, events))
}

/// O(N²) direct-summation log-likelihood.
pub fn log_likelihood_naive(theta: &ExpTheta, events: &EventSeries) -> Result<f64> {
    theta.validate()?;
    let times = events.times();
    let mut log_sum = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let excitation: f64 = times[..i]
            .iter()
            .map(|&s| theta.alpha * (-theta.beta * (t - s)).exp())
            .sum();
        let intensity = theta.mu + excitation;
        if intensity <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_sum += intensity.ln();
    }
    let h = events.horizon();
    let mut integral = theta.mu * h.len();
    for &t in times {
        integral += theta.alpha / theta.beta * (1.0 - (-theta.beta * (h.end - t)).exp());
    }
    Ok(log_sum - integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFitResult {
    pub mu_hat: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ExpFitResult {
    pub fn theta(&self) -> ExpTheta {
        ExpTheta::new(self.mu_hat, self.alpha_hat, self.beta_hat)
    }

    pub fn n_hat(&self) -> f64 {
        self.alpha_hat / self.beta_hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MleOptions {
    pub simplex: SimplexOptions,
}

/// Starting points `(μ₀ = Λ̂/2, n₀ = 0.5)` crossed with
/// `β₀ ∈ {0.1, 1, 10} / mean inter-event gap`.
pub fn default_starts(events: &EventSeries) -> Vec<ExpTheta> {
    let rate = events.rate();
    let gap = events.horizon().len() / events.len().max(1) as f64;
    [0.1, 1.0, 10.0]
        .iter()
        .map(|&scale| {
            let beta = scale / gap;
            ExpTheta::new(rate / 2.0, 0.5 * beta, beta)
        })
        .collect()
}

/// Maximizes the exponential-kernel likelihood. With `init` the search
/// starts there only; otherwise from [`default_starts`], returning the best.
pub fn fit_mle_exp(
    events: &EventSeries,
    init: Option<ExpTheta>,
    opts: &MleOptions,
) -> Result<ExpFitResult> {
    if events.len() < MIN_FIT_EVENTS {
        return Err(Error::TooFewEvents {
            required: MIN_FIT_EVENTS,
            got: events.len(),
        });
    }
    let starts = match init {
        Some(theta) => {
            theta.validate()?;
            vec![theta]
        }
        None => default_starts(events),
    };
    let objective = |x: &[f64]| {
        let theta = ExpTheta::from_log(x);
        match log_likelihood_exp(&theta, events) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };
    let fits: Vec<ExpFitResult> = starts
        .par_iter()
        .map(|start| {
            let r = nelder_mead(objective, &start.to_log(), &opts.simplex);
            let theta = ExpTheta::from_log(&r.x);
            ExpFitResult {
                mu_hat: theta.mu,
                alpha_hat: theta.alpha,
                beta_hat: theta.beta,
                log_likelihood: -r.value,
                converged: r.converged,
                iterations: r.iterations,
            }
        })
        .collect();
    // first-listed start wins ties so the result is order-deterministic
    let best = fits
        .into_iter()
        .reduce(|a, b| if b.log_likelihood > a.log_likelihood { b } else { a })
        .expect("at least one start");
    Ok(best)
}

/// Replaces each timestamp by a uniform draw inside its reporting bucket
/// `[k·interval, (k+1)·interval)`, intersected with the horizon.
pub fn randomize_timestamps(events: &EventSeries, interval: f64, seed: u64) -> Result<EventSeries> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "randomization interval must be > 0, got {interval}"
        )));
    }
    let h = events.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = events
        .times()
        .iter()
        .map(|&t| {
            let bucket = (t / interval).floor();
            let lo = (bucket * interval).max(h.begin);
            let hi = ((bucket + 1.0) * interval).min(h.end);
            let u: f64 = rng.random();
            let candidate = lo + u * (hi - lo);
            if (candidate / interval).floor() == bucket && candidate <= h.end {
                candidate
            } else {
                t
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    jitter_ties(&mut out);
    if out.last().is_some_and(|&t| t > h.end) {
        // a tie at the horizon end cannot be jittered upward
        return Err(Error::InvalidSeries(
            "tied timestamps at the horizon end".into(),
        ));
    }
    EventSeries::new(out, h)
}
