//! Realizations of stationary Hawkes processes.
//!
//! Two independent generators are provided. [`simulate_thinning`] is Ogata
//! thinning started from an empty history; [`simulate_branching`] builds the
//! same law from its cluster representation (Poisson immigrants, each event
//! spawning `Poisson(n)` children at lags drawn from `φ/n`). Both run on
//! `[0, T]` and discard `[0, burn_in)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, KernelSpec};
use crate::series::{EventSeries, Horizon};

pub const DEFAULT_EVENT_CAP: f64 = 1e8;

/// Kernel contributions below this fraction of `μ` are dropped by the
/// general-kernel thinning loop.
pub const DEFAULT_TRUNCATION_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: HawkesParams,
    /// Simulated time `T` in seconds.
    pub horizon: f64,
    /// Initial stretch `[0, burn_in)` that is discarded.
    pub burn_in: f64,
    pub seed: u64,
    /// Upper limit on the expected number of simulated events.
    pub event_cap: f64,
    /// History lag ignored by the general-kernel thinning loop. `None`
    /// derives it from [`DEFAULT_TRUNCATION_FRACTION`].
    pub truncation_lag: Option<f64>,
}

impl SimConfig {
    pub fn new(params: HawkesParams, horizon: f64, burn_in: f64, seed: u64) -> Self {
        Self {
            params,
            horizon,
            burn_in,
            seed,
            event_cap: DEFAULT_EVENT_CAP,
            truncation_lag: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.horizon.is_finite() && self.burn_in >= 0.0 && self.horizon > self.burn_in) {
            return Err(Error::InvalidParameter(format!(
                "need T > burn_in >= 0, got T={}, burn_in={}",
                self.horizon, self.burn_in
            )));
        }
        let n = self.params.branching_ratio();
        if n >= 1.0 {
            return Err(Error::NonStationary(n));
        }
        let expected = self.params.mu * self.horizon / (1.0 - n);
        if expected > self.event_cap {
            return Err(Error::EventCapExceeded {
                expected,
                cap: self.event_cap,
            });
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn finish(&self, times: Vec<f64>) -> Result<EventSeries> {
        let full = EventSeries::new(times, Horizon::new(0.0, self.horizon)?)?;
        apply_burn_in(&full, self.burn_in)
    }

    fn cap_check(&self, count: usize) -> Result<()> {
        if count as f64 > self.event_cap {
            return Err(Error::EventCapExceeded {
                expected: count as f64,
                cap: self.event_cap,
            });
        }
        Ok(())
    }
}

/// Ogata thinning. Exponential kernels use the Markovian excitation
/// update; other kernels sum the retained history at each candidate.
pub fn simulate_thinning(config: &SimConfig) -> Result<EventSeries> {
    config.validate()?;
    let mut rng = config.rng();
    let times = match config.params.kernel {
        KernelSpec::Exponential { alpha, beta } => {
            thin_exponential(config, alpha, beta, &mut rng)?
        }
        _ => thin_general(config, &mut rng)?,
    };
    config.finish(times)
}

fn thin_exponential(
    config: &SimConfig,
    alpha: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mu = config.params.mu;
    let end = config.horizon;
    let mut times = Vec::new();
    let mut t = 0.0;
    // excitation Σ α e^{−β(t − t_i)} just after t
    let mut excitation = 0.0;
    loop {
        let bound = mu + excitation;
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        let wait = wait / bound;
        t += wait;
        if t > end {
            break;
        }
        excitation *= (-beta * wait).exp();
        let accept: f64 = rng.random();
        if accept * bound <= mu + excitation {
            times.push(t);
            excitation += alpha;
            if times.len() % 1_000_000 == 0 {
                config.cap_check(times.len())?;
            }
        }
    }
    Ok(times)
}

fn thin_general(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mu = config.params.mu;
    let kernel = config.params.kernel;
    let end = config.horizon;
    let lag = match config.truncation_lag {
        Some(l) => l,
        None => kernel.lag_below(DEFAULT_TRUNCATION_FRACTION * mu.max(f64::MIN_POSITIVE)),
    };
    let excitation_at = |history: &[f64], t: f64| -> f64 {
        history.iter().map(|&s| kernel.eval_unchecked(t - s)).sum()
    };

    let mut times: Vec<f64> = Vec::new();
    let mut oldest = 0;
    let mut t = 0.0;
    // kernels are non-increasing, so the intensity just after t bounds it
    // until the next event
    let mut bound = mu;
    loop {
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        t += wait / bound;
        if t > end {
            break;
        }
        while oldest < times.len() && t - times[oldest] > lag {
            oldest += 1;
        }
        let intensity = mu + excitation_at(&times[oldest..], t);
        let accept: f64 = rng.random();
        if accept * bound <= intensity {
            times.push(t);
            config.cap_check(times.len())?;
            bound = intensity + kernel.eval_unchecked(0.0);
        } else {
            bound = intensity;
        }
    }
    Ok(times)
}

/// Cluster-representation simulation; an oracle for [`simulate_thinning`].
pub fn simulate_branching(config: &SimConfig) -> Result<EventSeries> {
    simulate_branching_with_stats(config).map(|(series, _)| series)
}

/// Bookkeeping from a cluster simulation on the full `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchingStats {
    pub immigrants: usize,
    /// Events on `[0, T]` before burn-in is removed.
    pub total: usize,
}

pub fn simulate_branching_with_stats(config: &SimConfig) -> Result<(EventSeries, BranchingStats)> {
    config.validate()?;
    let mut rng = config.rng();
    let end = config.horizon;
    let kernel = config.params.kernel;
    let n = kernel.integral();

    let expected_immigrants = config.params.mu * end;
    let immigrants = if expected_immigrants > 0.0 {
        Poisson::new(expected_immigrants)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let mut times: Vec<f64> = (0..immigrants).map(|_| rng.random::<f64>() * end).collect();

    if n > 0.0 {
        let offspring =
            Poisson::new(n).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut pending = times.clone();
        while let Some(parent) = pending.pop() {
            let children = offspring.sample(&mut rng) as usize;
            for _ in 0..children {
                let child = parent + sample_lag(&kernel, &mut rng);
                // descendants of a child beyond T also fall beyond T
                if child <= end {
                    times.push(child);
                    pending.push(child);
                }
            }
            config.cap_check(times.len())?;
        }
    }

    times.sort_by(f64::total_cmp);
    crate::series::jitter_ties(&mut times);
    let stats = BranchingStats {
        immigrants,
        total: times.len(),
    };
    // jitter can push the last event past T only if it sat exactly on T
    if times.last().is_some_and(|&t| t > end) {
        times.pop();
    }
    Ok((config.finish(times)?, stats))
}

/// Draws a lag from the normalized kernel density `φ(τ)/n`.
fn sample_lag(kernel: &KernelSpec, rng: &mut ChaCha8Rng) -> f64 {
    match *kernel {
        KernelSpec::Null => 0.0,
        KernelSpec::Exponential { beta, .. } => {
            let e: f64 = Exp1.sample(rng);
            e / beta
        }
        KernelSpec::PowerLawOmori { epsilon, tau0, .. } => {
            let u = 1.0 - rng.random::<f64>();
            tau0 * (u.powf(-1.0 / epsilon) - 1.0)
        }
    }
}

/// Removes events before `cutoff` and moves the horizon start to it.
pub fn apply_burn_in(series: &EventSeries, cutoff: f64) -> Result<EventSeries> {
    let h = series.horizon();
    if !(cutoff >= h.begin && cutoff < h.end) {
        return Err(Error::InvalidParameter(format!(
            "burn-in cutoff {cutoff} outside horizon [{}, {})",
            h.begin, h.end
        )));
    }
    if cutoff == h.begin {
        return Ok(series.clone());
    }
    series.restrict(cutoff, h.end)
}
