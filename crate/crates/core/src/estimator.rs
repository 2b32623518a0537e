//! Mean-variance branching-ratio estimator.
//!
//! Counting events in `m` consecutive windows of width `W` gives the sample
//! mean `μ̃_W` and unbiased sample variance `σ̃²_W` of the window count.
//! Because `σ²_W ≈ W ∫ν = W Λ/(1 − n)²` for `W` much longer than the
//! correlation time, the branching ratio is approximated by
//!
//! ```text
//! ñ = 1 − sqrt(μ̃_W / σ̃²_W)
//! ```
//!
//! For finite `W` the window misses part of the autocovariance, so `ñ`
//! underestimates `n`, with the gap shrinking as `W` grows. A sample
//! variance of exactly zero has positive probability, which makes the
//! ensemble mean of `ñ` undefined; aggregate with medians instead.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{EventSeries, Horizon};
use crate::stats;

/// Smallest number of windows a sweep grid point may use.
pub const MIN_SWEEP_WINDOWS: usize = 8;
pub const MIN_BOOTSTRAP_REPLICATES: usize = 100;

/// Event counts in windows of fixed width.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCounts {
    pub width: f64,
    pub counts: Vec<f64>,
    /// Interval covered by the windows.
    pub span: Horizon,
    /// Start-to-start spacing for overlapping windows; `None` when the
    /// windows tile the span.
    pub stride: Option<f64>,
    /// Counts are real-valued after de-seasonalization.
    pub adjusted: bool,
}

impl WindowCounts {
    pub fn new(width: f64, counts: Vec<f64>, span: Horizon) -> Self {
        Self {
            width,
            counts,
            span,
            stride: None,
            adjusted: false,
        }
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Partitions `[begin, begin + mW)` into `m = ⌊(end − begin)/W⌋` windows
/// and counts events in each. The trailing partial window is dropped.
pub fn window_counts(series: &EventSeries, width: f64) -> Result<WindowCounts> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidParameter(format!("window must be > 0, got {width}")));
    }
    let h = series.horizon();
    let m = (h.len() / width).floor() as usize;
    if m < 2 {
        return Err(Error::TooFewWindows { required: 2, got: m });
    }
    let stop = h.begin + m as f64 * width;
    let mut counts = vec![0.0; m];
    for &t in series.slice(h.begin, stop) {
        let i = (((t - h.begin) / width) as usize).min(m - 1);
        counts[i] += 1.0;
    }
    Ok(WindowCounts::new(width, counts, Horizon::new(h.begin, stop)?))
}

/// Counts in windows `[begin + k·stride, begin + k·stride + W)` for every
/// `k` whose window fits inside the horizon.
pub fn window_counts_overlapping(
    series: &EventSeries,
    width: f64,
    stride: f64,
) -> Result<WindowCounts> {
    if !(width > 0.0 && stride > 0.0 && stride.is_finite() && width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "window and stride must be > 0, got {width} and {stride}"
        )));
    }
    let h = series.horizon();
    if h.len() < width {
        return Err(Error::TooFewWindows { required: 2, got: 0 });
    }
    let m = ((h.len() - width) / stride).floor() as usize + 1;
    if m < 2 {
        return Err(Error::TooFewWindows { required: 2, got: m });
    }
    let counts = (0..m)
        .map(|k| {
            let start = h.begin + k as f64 * stride;
            series.slice(start, start + width).len() as f64
        })
        .collect();
    let stop = h.begin + (m - 1) as f64 * stride + width;
    Ok(WindowCounts {
        width,
        counts,
        span: Horizon::new(h.begin, stop)?,
        stride: Some(stride),
        adjusted: false,
    })
}

/// Bootstrap interval attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Quantile levels of `lower` and `upper`.
    pub coverage: (f64, f64),
    pub replicates: usize,
    /// Replicates discarded for zero mean or zero variance.
    pub degenerate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingEstimate {
    pub n_tilde: f64,
    pub mu_w: f64,
    pub sigma2_w: f64,
    pub width: f64,
    pub m: usize,
    pub ci: Option<ConfidenceInterval>,
}

impl BranchingEstimate {
    /// `sqrt(μ̃_W / σ̃²_W)`, i.e. `1 − ñ`.
    pub fn one_minus_n(&self) -> f64 {
        (self.mu_w / self.sigma2_w).sqrt()
    }
}

fn branching_from_moments(mu_w: f64, sigma2_w: f64) -> Result<f64> {
    if mu_w <= 0.0 {
        return Err(Error::DegenerateMean);
    }
    if sigma2_w <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(1.0 - (mu_w / sigma2_w).sqrt())
}

/// `ñ = 1 − sqrt(μ̃_W / σ̃²_W)` with the `m − 1` variance divisor.
pub fn estimate_branching(counts: &WindowCounts) -> Result<BranchingEstimate> {
    let m = counts.m();
    if m < 2 {
        return Err(Error::TooFewWindows { required: 2, got: m });
    }
    let mu_w = stats::mean(&counts.counts);
    let sigma2_w = stats::sample_variance(&counts.counts);
    let n_tilde = branching_from_moments(mu_w, sigma2_w)?;
    Ok(BranchingEstimate {
        n_tilde,
        mu_w,
        sigma2_w,
        width: counts.width,
        m,
        ci: None,
    })
}

/// Percentile bootstrap over i.i.d. resampled windows. Replicate `i` uses
/// its own generator seeded with `seed ^ i`.
pub fn bootstrap_ci(
    counts: &WindowCounts,
    replicates: usize,
    coverage: (f64, f64),
    seed: u64,
) -> Result<ConfidenceInterval> {
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_BOOTSTRAP_REPLICATES} bootstrap replicates, got {replicates}"
        )));
    }
    if counts.stride.is_some() {
        return Err(Error::InvalidParameter(
            "i.i.d. bootstrap is not valid for overlapping windows".into(),
        ));
    }
    let (lo, hi) = coverage;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coverage quantiles must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"
        )));
    }
    let m = counts.m();
    if m < 2 {
        return Err(Error::TooFewWindows { required: 2, got: m });
    }
    let data = &counts.counts;
    let draws: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            let sample: Vec<f64> = (0..m).map(|_| data[rng.random_range(0..m)]).collect();
            for &x in &sample {
                sum += x;
            }
            let mean = sum / m as f64;
            for &x in &sample {
                sum_sq += (x - mean) * (x - mean);
            }
            branching_from_moments(mean, sum_sq / (m as f64 - 1.0)).ok()
        })
        .collect();
    let mut valid: Vec<f64> = draws.iter().flatten().copied().collect();
    let degenerate = replicates - valid.len();
    if 2 * degenerate > replicates {
        return Err(Error::BootstrapDegenerate {
            degenerate,
            total: replicates,
        });
    }
    valid.sort_by(f64::total_cmp);
    Ok(ConfidenceInterval {
        lower: stats::quantile_sorted(&valid, lo).expect("non-empty"),
        upper: stats::quantile_sorted(&valid, hi).expect("non-empty"),
        coverage,
        replicates,
        degenerate,
    })
}

/// Why a rolling period produced no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gap {
    NoEvents,
    ZeroVariance,
    TooFewWindows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEstimate {
    pub start: f64,
    pub result: std::result::Result<BranchingEstimate, Gap>,
}

impl PeriodEstimate {
    pub fn value(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|e| e.n_tilde)
    }
}

fn period_estimate(series: &EventSeries, start: f64, period: f64, width: f64) -> PeriodEstimate {
    let m = (period / width).floor() as usize;
    if m < 2 {
        return PeriodEstimate {
            start,
            result: Err(Gap::TooFewWindows),
        };
    }
    let stop = start + m as f64 * width;
    let mut counts = vec![0.0; m];
    for &t in series.slice(start, stop) {
        let i = (((t - start) / width) as usize).min(m - 1);
        counts[i] += 1.0;
    }
    let span = Horizon {
        begin: start,
        end: stop,
    };
    period_from_counts(start, &WindowCounts::new(width, counts, span))
}

pub(crate) fn period_from_counts(start: f64, counts: &WindowCounts) -> PeriodEstimate {
    let result = estimate_branching(counts).map_err(|e| match e {
        Error::DegenerateMean => Gap::NoEvents,
        Error::DegenerateVariance => Gap::ZeroVariance,
        _ => Gap::TooFewWindows,
    });
    PeriodEstimate { start, result }
}

/// Splits the horizon into consecutive periods and estimates `ñ` inside
/// each from `⌊period / W⌋` windows. Degenerate periods become gaps.
pub fn rolling_estimates(series: &EventSeries, period: f64, width: f64) -> Result<Vec<PeriodEstimate>> {
    if !(width > 0.0 && period >= 2.0 * width) {
        return Err(Error::InvalidParameter(format!(
            "period {period} must be at least twice the window {width}"
        )));
    }
    rolling_estimates_with(series, period, |_| width)
}

/// As [`rolling_estimates`] with the window chosen per period start.
pub fn rolling_estimates_with<F>(series: &EventSeries, period: f64, width_at: F) -> Result<Vec<PeriodEstimate>>
where
    F: Fn(f64) -> f64,
{
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter(format!("period must be > 0, got {period}")));
    }
    let h = series.horizon();
    let count = (h.len() / period).floor() as usize;
    Ok((0..count)
        .map(|k| {
            let start = h.begin + k as f64 * period;
            let width = width_at(start);
            period_estimate(series, start, period, width)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianBucket<K> {
    pub bucket: K,
    pub median: f64,
    pub count: usize,
}

/// Median of the available values in each bucket, in bucket order.
/// Buckets holding only gaps are omitted and logged.
pub fn aggregate_median<K, I>(items: I) -> Vec<MedianBucket<K>>
where
    K: Ord + Clone + std::fmt::Debug,
    I: IntoIterator<Item = (K, Option<f64>)>,
{
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in items {
        let slot = groups.entry(k).or_default();
        if let Some(v) = v {
            slot.push(v);
        }
    }
    groups
        .into_iter()
        .filter_map(|(bucket, values)| match stats::median(&values) {
            Some(median) => Some(MedianBucket {
                bucket,
                median,
                count: values.len(),
            }),
            None => {
                log::warn!("bucket {bucket:?} has no estimates; omitted");
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub width: f64,
    pub estimate: BranchingEstimate,
}

impl SweepPoint {
    pub fn one_minus_n(&self) -> f64 {
        self.estimate.one_minus_n()
    }

    pub fn pair(&self) -> (f64, f64) {
        (self.width, self.one_minus_n())
    }
}

/// `1 − ñ` on the full series for each window in an ascending grid. Grid
/// points leaving fewer than [`MIN_SWEEP_WINDOWS`] windows, or giving a
/// degenerate estimate, are skipped with a warning.
pub fn window_sweep(series: &EventSeries, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("window grid must be strictly ascending".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for &width in grid {
        let m = (series.horizon().len() / width).floor() as usize;
        if m < MIN_SWEEP_WINDOWS {
            log::warn!("window {width}s leaves {m} windows (< {MIN_SWEEP_WINDOWS}); skipped");
            continue;
        }
        match window_counts(series, width).and_then(|c| estimate_branching(&c)) {
            Ok(estimate) => out.push(SweepPoint { width, estimate }),
            Err(e) => log::warn!("window {width}s skipped: {e}"),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Log-log slope of `1 − ñ` against `W`.
    pub slope: f64,
    /// `−slope`.
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Unweighted least squares of `ln(1 − ñ)` on `ln W` for grid points with
/// `W_min <= W <= W_max`.
pub fn fit_scaling_exponent(sweep: &[(f64, f64)], range: (f64, f64)) -> Result<ScalingFit> {
    let inside: Vec<(f64, f64)> = sweep
        .iter()
        .copied()
        .filter(|&(w, _)| w >= range.0 && w <= range.1)
        .collect();
    if inside.len() < 4 {
        return Err(Error::ScalingFit(format!(
            "need at least 4 points in [{}, {}], got {}",
            range.0,
            range.1,
            inside.len()
        )));
    }
    if let Some(&(w, y)) = inside.iter().find(|&&(_, y)| y.is_nan() || y <= 0.0) {
        return Err(Error::ScalingFit(format!("1 - n_tilde = {y} at W = {w} is not positive")));
    }
    let x: Vec<f64> = inside.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = inside.iter().map(|p| p.1.ln()).collect();
    let fit = stats::linear_fit(&x, &y)
        .ok_or_else(|| Error::ScalingFit("degenerate window grid".into()))?;
    Ok(ScalingFit {
        slope: fit.slope,
        exponent: -fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points: inside.len(),
    })
}
