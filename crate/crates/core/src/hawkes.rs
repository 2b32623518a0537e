//! Hawkes process parameterization and the closed-form identities used by
//! the simulators and estimators.
//!
//! The conditional intensity is
//!
//! ```text
//! λ(t) = μ + Σ_{t_i < t} φ(t − t_i)
//! ```
//!
//! and for a stationary process (`n = ∫φ < 1`) the mean rate is
//! `Λ = μ / (1 − n)` while the autocovariance of the event rate integrates
//! to `Λ / (1 − n)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::EventSeries;

/// Influence kernel `φ(τ)` of a linear Hawkes process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `φ ≡ 0`: the process is Poisson with rate `μ`.
    Null,
    /// `φ(τ) = α e^{−βτ}`.
    Exponential { alpha: f64, beta: f64 },
    /// `φ(τ) = n ε τ0^ε / (τ0 + τ)^{1+ε}`, parameterized by its integral.
    PowerLawOmori { n: f64, epsilon: f64, tau0: f64 },
}

impl KernelSpec {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        let k = Self::Exponential { alpha, beta };
        k.validate()?;
        Ok(k)
    }

    pub fn omori(n: f64, epsilon: f64, tau0: f64) -> Result<Self> {
        let k = Self::PowerLawOmori { n, epsilon, tau0 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Null => Ok(()),
            Self::Exponential { alpha, beta } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
                }
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
                }
                Ok(())
            }
            Self::PowerLawOmori { n, epsilon, tau0 } => {
                if !(0.0..=1.0).contains(&n) {
                    return Err(Error::InvalidParameter(format!("n must be in [0, 1], got {n}")));
                }
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "epsilon must be > 0, got {epsilon}"
                    )));
                }
                if !(tau0 > 0.0 && tau0.is_finite()) {
                    return Err(Error::InvalidParameter(format!("tau0 must be > 0, got {tau0}")));
                }
                Ok(())
            }
        }
    }

    /// Kernel value at lag `tau >= 0`.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 || tau.is_nan() {
            return Err(Error::NegativeLag(tau));
        }
        Ok(self.eval_unchecked(tau))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, tau: f64) -> f64 {
        match *self {
            Self::Null => 0.0,
            Self::Exponential { alpha, beta } => alpha * (-beta * tau).exp(),
            Self::PowerLawOmori { n, epsilon, tau0 } => {
                n * epsilon * tau0.powf(epsilon) / (tau0 + tau).powf(1.0 + epsilon)
            }
        }
    }

    /// Branching ratio `n = ∫₀^∞ φ(τ) dτ`.
    pub fn integral(&self) -> f64 {
        match *self {
            Self::Null => 0.0,
            Self::Exponential { alpha, beta } => alpha / beta,
            Self::PowerLawOmori { n, .. } => n,
        }
    }

    /// `∫₀^lag φ(τ) dτ`.
    pub fn integral_to(&self, lag: f64) -> f64 {
        match *self {
            Self::Null => 0.0,
            Self::Exponential { alpha, beta } => alpha / beta * (-(-beta * lag).exp_m1()),
            Self::PowerLawOmori { n, epsilon, tau0 } => {
                n * (1.0 - (tau0 / (tau0 + lag)).powf(epsilon))
            }
        }
    }

    /// Lag beyond which `φ(τ) < threshold`; zero if `φ(0)` is already below.
    pub fn lag_below(&self, threshold: f64) -> f64 {
        let at_zero = self.eval_unchecked(0.0);
        if threshold <= 0.0 {
            return f64::INFINITY;
        }
        if at_zero <= threshold {
            return 0.0;
        }
        match *self {
            Self::Null => 0.0,
            Self::Exponential { alpha, beta } => (alpha / threshold).ln() / beta,
            Self::PowerLawOmori { n, epsilon, tau0 } => {
                (n * epsilon * tau0.powf(epsilon) / threshold).powf(1.0 / (1.0 + epsilon)) - tau0
            }
        }
    }
}

/// `φ(τ)` for `tau >= 0`; negative lags are a domain error.
pub fn kernel_eval(kernel: &KernelSpec, tau: f64) -> Result<f64> {
    kernel.eval(tau)
}

pub fn kernel_integral(kernel: &KernelSpec) -> f64 {
    kernel.integral()
}

/// Base intensity plus kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: f64,
    pub kernel: KernelSpec,
}

impl HawkesParams {
    pub fn new(mu: f64, kernel: KernelSpec) -> Result<Self> {
        let p = Self { mu, kernel };
        p.validate()?;
        Ok(p)
    }

    /// Exponential kernel with branching ratio `n`, decay `beta`, and base
    /// intensity chosen so the stationary rate equals `rate`.
    pub fn exponential_with_rate(n: f64, beta: f64, rate: f64) -> Result<Self> {
        Self::new(rate * (1.0 - n), KernelSpec::exponential(n * beta, beta)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be >= 0, got {}", self.mu)));
        }
        self.kernel.validate()
    }

    pub fn branching_ratio(&self) -> f64 {
        self.kernel.integral()
    }

    pub fn is_stationary(&self) -> bool {
        self.branching_ratio() < 1.0
    }

    /// Stationary mean rate `μ / (1 − n)`.
    pub fn stationary_rate(&self) -> Result<f64> {
        theoretical_rate(self.mu, self.branching_ratio())
    }
}

/// Conditional intensity at `t`. Only events strictly before `t` contribute.
pub fn intensity_at(params: &HawkesParams, history: &EventSeries, t: f64) -> f64 {
    let past = history.times().partition_point(|&s| s < t);
    params.mu
        + history.times()[..past]
            .iter()
            .map(|&s| params.kernel.eval_unchecked(t - s))
            .sum::<f64>()
}

/// `Λ = μ / (1 − n)`.
pub fn theoretical_rate(mu: f64, n: f64) -> Result<f64> {
    if n >= 1.0 {
        return Err(Error::NonStationary(n));
    }
    if mu < 0.0 || n < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need mu >= 0 and n >= 0, got mu={mu}, n={n}"
        )));
    }
    Ok(mu / (1.0 - n))
}

/// Integral of the event-rate autocovariance, `Λ / (1 − n)²`.
pub fn theoretical_acov_integral(rate: f64, n: f64) -> Result<f64> {
    if n >= 1.0 {
        return Err(Error::NonStationary(n));
    }
    if rate <= 0.0 || n < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need rate > 0 and n >= 0, got rate={rate}, n={n}"
        )));
    }
    let gap = 1.0 - n;
    Ok(rate / (gap * gap))
}
