//! Simulation of self-exciting Hawkes processes and estimation of their
//! branching ratio.
//!
//! The central tool is the mean-variance estimator in [`estimator`],
//! `ñ = 1 − sqrt(μ̃_W / σ̃²_W)`, computed from the sample mean and variance
//! of event counts in windows of width `W`. It needs no kernel model and is
//! validated here against the exact simulators in [`simulate`] and the
//! exponential-kernel maximum-likelihood fit in [`mle`].

pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod hawkes;
pub mod mle;
pub mod optim;
pub mod pipeline;
pub mod series;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{
    aggregate_median, bootstrap_ci, estimate_branching, fit_scaling_exponent, rolling_estimates,
    window_counts, window_sweep, BranchingEstimate, ConfidenceInterval, WindowCounts,
};
pub use hawkes::{
    intensity_at, kernel_eval, kernel_integral, theoretical_acov_integral, theoretical_rate,
    HawkesParams, KernelSpec,
};
pub use mle::{fit_mle_exp, log_likelihood_exp, log_likelihood_naive, randomize_timestamps, ExpFitResult, ExpTheta};
pub use pipeline::{BinnedSeries, SessionSpec, TimeFormat};
pub use series::{EventSeries, Horizon};
pub use simulate::{apply_burn_in, simulate_branching, simulate_thinning, SimConfig};
