//! Experiment drivers. Each returns plain rows; writing them is left to
//! the caller.

use anyhow::{ensure, Context, Result};
use chrono::NaiveDate;
use reflex_core::ensemble::{self, member_seed};
use reflex_core::estimator::{rolling_estimates_with, Gap, PeriodEstimate, MIN_SWEEP_WINDOWS};
use reflex_core::mle::{MleOptions, MIN_FIT_EVENTS};
use reflex_core::pipeline::{
    self, binned_rolling_estimates, binned_window_counts, deseasonalize, local_date, month_bucket,
    moores_law_window, stitch_events, BinnedSeries,
};
use reflex_core::stats::summarize;
use reflex_core::{
    aggregate_median, bootstrap_ci, estimate_branching, fit_mle_exp, fit_scaling_exponent, randomize_timestamps,
    simulate_branching, simulate_thinning, window_counts, window_sweep, BranchingEstimate, EventSeries,
    HawkesParams, SimConfig, WindowCounts,
};
use serde::Serialize;

use crate::config::{
    EstimateArgs, FitMleArgs, Method, PowerlawArgs, PowerlawResolved, ReflexivityArgs, SessionArgs, SimulateArgs,
    SweepNArgs, SweepWArgs,
};

pub fn simulate_with(config: &SimConfig, method: Method) -> reflex_core::Result<EventSeries> {
    match method {
        Method::Thinning => simulate_thinning(config),
        Method::Branching => simulate_branching(config),
    }
}

pub fn simulate_config(args: &SimulateArgs) -> Result<SimConfig> {
    let config = SimConfig {
        event_cap: args.event_cap,
        truncation_lag: args.truncation_lag,
        ..SimConfig::new(args.process.params()?, args.horizon, args.burn_in, args.common.seed)
    };
    config.validate()?;
    Ok(config)
}

/// One series per ensemble member, in member order.
pub fn simulate(args: &SimulateArgs) -> Result<Vec<EventSeries>> {
    let config = simulate_config(args)?;
    let members = args.common.ensemble_or(1);
    ensemble::run(args.common.seed, members, args.common.workers, |_, seed| {
        simulate_with(&config.with_seed(seed), args.method)
    })
    .into_iter()
    .collect::<reflex_core::Result<Vec<_>>>()
    .map_err(Into::into)
}

/// Ensemble statistics of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Band {
    members: usize,
    valid: usize,
    mean: Option<f64>,
    median: Option<f64>,
    q05: Option<f64>,
    q95: Option<f64>,
}

impl Band {
    fn of(values: &[Option<f64>]) -> Self {
        let valid: Vec<f64> = values.iter().flatten().copied().collect();
        let s = summarize(&valid, 0.05, 0.95);
        Band {
            members: values.len(),
            valid: valid.len(),
            mean: s.as_ref().map(|s| s.mean),
            median: s.as_ref().map(|s| s.median),
            q05: s.as_ref().map(|s| s.lo),
            q95: s.as_ref().map(|s| s.hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepNRow {
    pub n: f64,
    pub mu: f64,
    pub alpha: f64,
    pub members: usize,
    pub valid: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q05: Option<f64>,
    pub q95: Option<f64>,
}

pub fn sweep_n(args: &SweepNArgs) -> Result<Vec<SweepNRow>> {
    let members = args.common.ensemble_or(100);
    args.n_grid
        .iter()
        .map(|&n| {
            let params = HawkesParams::exponential_with_rate(n, args.beta, args.rate)?;
            let config = SimConfig::new(params, args.horizon, args.burn_in, args.common.seed);
            config.validate()?;
            let values = ensemble::run(args.common.seed, members, args.common.workers, |_, seed| {
                let series = simulate_with(&config.with_seed(seed), args.method)?;
                Ok(estimate_branching(&window_counts(&series, args.window)?).ok().map(|e| e.n_tilde))
            })
            .into_iter()
            .collect::<reflex_core::Result<Vec<_>>>()?;
            let b = Band::of(&values);
            Ok(SweepNRow {
                n,
                mu: params.mu,
                alpha: n * args.beta,
                members: b.members,
                valid: b.valid,
                mean: b.mean,
                median: b.median,
                q05: b.q05,
                q95: b.q95,
            })
        })
        .collect()
}

/// Grid points that leave at least [`MIN_SWEEP_WINDOWS`] windows.
fn usable_grid(grid: &[f64], span: f64) -> Result<Vec<(f64, usize)>> {
    ensure!(
        grid.windows(2).all(|w| w[0] < w[1]),
        "window grid must be strictly ascending"
    );
    Ok(grid
        .iter()
        .filter_map(|&w| {
            let m = (span / w).floor() as usize;
            if m < MIN_SWEEP_WINDOWS {
                log::warn!("window {w}s leaves {m} windows (< {MIN_SWEEP_WINDOWS}); omitted");
                None
            } else {
                Some((w, m))
            }
        })
        .collect())
}

/// Per member, the estimate at each grid point (`None` when degenerate).
fn sweep_ensemble(
    config: &SimConfig,
    method: Method,
    grid: &[f64],
    members: usize,
    workers: Option<usize>,
) -> Result<Vec<Vec<Option<BranchingEstimate>>>> {
    ensemble::run(config.seed, members, workers, |_, seed| {
        let series = simulate_with(&config.with_seed(seed), method)?;
        let sweep = window_sweep(&series, grid)?;
        Ok(grid
            .iter()
            .map(|&w| sweep.iter().find(|p| p.width == w).map(|p| p.estimate))
            .collect())
    })
    .into_iter()
    .collect::<reflex_core::Result<Vec<_>>>()
    .map_err(Into::into)
}

/// Ensemble band of `ñ` at one window size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepWRow {
    pub width: f64,
    pub m: usize,
    pub members: usize,
    pub valid: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q05: Option<f64>,
    pub q95: Option<f64>,
}

impl SweepWRow {
    fn new(width: f64, m: usize, b: Band) -> Self {
        SweepWRow {
            width,
            m,
            members: b.members,
            valid: b.valid,
            mean: b.mean,
            median: b.median,
            q05: b.q05,
            q95: b.q95,
        }
    }

    pub fn band_width(&self) -> Option<f64> {
        Some(self.q95? - self.q05?)
    }
}

pub fn sweep_w(args: &SweepWArgs) -> Result<Vec<SweepWRow>> {
    let config = SimConfig::new(args.process.params()?, args.horizon, args.burn_in, args.common.seed);
    config.validate()?;
    let grid = usable_grid(&args.w_grid, args.horizon - args.burn_in)?;
    let widths: Vec<f64> = grid.iter().map(|g| g.0).collect();
    let members = args.common.ensemble_or(100);
    let runs = sweep_ensemble(&config, args.method, &widths, members, args.common.workers)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &(width, m))| {
            let values: Vec<Option<f64>> = runs.iter().map(|r| r[i].map(|e| e.n_tilde)).collect();
            SweepWRow::new(width, m, Band::of(&values))
        })
        .collect())
}

/// Ensemble band of `1 − ñ` at one window size.
pub type PowerlawRow = SweepWRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerlawFitRow {
    pub w_min: f64,
    pub w_max: f64,
    pub slope: f64,
    pub epsilon_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// `1 − n` of the simulated process.
    pub floor: f64,
    pub largest_width: f64,
    pub largest_median: f64,
    pub largest_q05: f64,
}

pub struct PowerlawOutput {
    pub resolved: PowerlawResolved,
    pub rows: Vec<PowerlawRow>,
    pub fit: PowerlawFitRow,
}

pub fn powerlaw(args: &PowerlawArgs) -> Result<PowerlawOutput> {
    let resolved = args.resolve()?;
    if resolved.horizon >= 1e9 {
        log::warn!(
            "simulating T = {:e}: expect hours of compute and memory for ~{:.1e} events",
            resolved.horizon,
            resolved.params.stationary_rate().unwrap_or(f64::NAN) * resolved.horizon
        );
    }
    let config = SimConfig {
        event_cap: resolved.event_cap,
        ..SimConfig::new(resolved.params, resolved.horizon, resolved.burn_in, args.common.seed)
    };
    config.validate()?;
    let grid = usable_grid(&resolved.grid, resolved.horizon - resolved.burn_in)?;
    let widths: Vec<f64> = grid.iter().map(|g| g.0).collect();
    let runs = sweep_ensemble(&config, args.method, &widths, resolved.ensemble, args.common.workers)?;
    let rows: Vec<PowerlawRow> = grid
        .iter()
        .enumerate()
        .map(|(i, &(width, m))| {
            let values: Vec<Option<f64>> = runs.iter().map(|r| r[i].map(|e| e.one_minus_n())).collect();
            SweepWRow::new(width, m, Band::of(&values))
        })
        .collect();
    let curve: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.width, r.median?)))
        .collect();
    let scaling = fit_scaling_exponent(&curve, (args.fit_min, args.fit_max))?;
    let last = rows.last().context("no usable window sizes")?;
    let fit = PowerlawFitRow {
        w_min: args.fit_min,
        w_max: args.fit_max,
        slope: scaling.slope,
        epsilon_hat: scaling.exponent,
        intercept: scaling.intercept,
        r_squared: scaling.r_squared,
        points: scaling.points,
        floor: 1.0 - resolved.params.branching_ratio(),
        largest_width: last.width,
        largest_median: last.median.unwrap_or(f64::NAN),
        largest_q05: last.q05.unwrap_or(f64::NAN),
    };
    Ok(PowerlawOutput { resolved, rows, fit })
}

/// Estimate columns shared by the file-based outputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimateColumns {
    pub n_tilde: Option<f64>,
    pub mu_w: Option<f64>,
    pub sigma2_w: Option<f64>,
    pub m: Option<usize>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

impl EstimateColumns {
    fn of(e: Option<&BranchingEstimate>) -> Self {
        EstimateColumns {
            n_tilde: e.map(|e| e.n_tilde),
            mu_w: e.map(|e| e.mu_w),
            sigma2_w: e.map(|e| e.sigma2_w),
            m: e.map(|e| e.m),
            ci_lo: e.and_then(|e| e.ci).map(|c| c.lower),
            ci_hi: e.and_then(|e| e.ci).map(|c| c.upper),
        }
    }
}

macro_rules! estimate_row {
    ($(#[$meta:meta])* $name:ident { $($field:ident: $ty:ty),* $(,)? } tail { $($tfield:ident: $tty:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct $name {
            $(pub $field: $ty,)*
            pub n_tilde: Option<f64>,
            pub mu_w: Option<f64>,
            pub sigma2_w: Option<f64>,
            pub m: Option<usize>,
            pub ci_lo: Option<f64>,
            pub ci_hi: Option<f64>,
            $(pub $tfield: $tty,)*
        }

        impl $name {
            fn new($($field: $ty,)* e: EstimateColumns, $($tfield: $tty),*) -> Self {
                $name {
                    $($field,)*
                    n_tilde: e.n_tilde,
                    mu_w: e.mu_w,
                    sigma2_w: e.sigma2_w,
                    m: e.m,
                    ci_lo: e.ci_lo,
                    ci_hi: e.ci_hi,
                    $($tfield,)*
                }
            }
        }
    };
}

/// Event series prepared for window counting.
enum Prepared {
    Raw(EventSeries),
    Stitched(EventSeries, BinnedSeries),
    Binned(BinnedSeries),
}

fn prepare(input: &crate::config::InputArgs, session: &SessionArgs) -> Result<(Prepared, i32)> {
    let series = pipeline::load_events(&input.input, input.format)
        .with_context(|| format!("loading {}", input.input.display()))?;
    let prepared = match session.spec()? {
        None => Prepared::Raw(series),
        Some(spec) => {
            let (stitched, binned) = stitch_events(&series, &spec)?;
            if session.deseasonalize {
                Prepared::Binned(deseasonalize(&binned, session.min_days)?)
            } else {
                Prepared::Stitched(stitched, binned)
            }
        }
    };
    Ok((prepared, session.utc_offset()))
}

fn with_bootstrap(
    mut estimate: BranchingEstimate,
    counts: &WindowCounts,
    replicates: usize,
    coverage: (f64, f64),
    seed: u64,
) -> BranchingEstimate {
    if replicates > 0 {
        match bootstrap_ci(counts, replicates, coverage, seed) {
            Ok(ci) => estimate.ci = Some(ci),
            Err(e) => log::warn!("no bootstrap interval at W={}: {e}", counts.width),
        }
    }
    estimate
}

estimate_row!(EstimateRow { width: f64 } tail { error: Option<String> });

pub fn estimate(args: &EstimateArgs) -> Result<Vec<EstimateRow>> {
    ensure!(args.coverage.len() == 2, "--coverage takes two quantiles");
    let coverage = (args.coverage[0], args.coverage[1]);
    let (prepared, _) = prepare(&args.input, &args.session)?;
    Ok(args
        .window
        .iter()
        .enumerate()
        .map(|(i, &width)| {
            let counts = match &prepared {
                Prepared::Raw(s) | Prepared::Stitched(s, _) => window_counts(s, width),
                Prepared::Binned(b) => binned_window_counts(b, width),
            };
            let result = counts.and_then(|c| {
                let e = estimate_branching(&c)?;
                let seed = member_seed(args.common.seed, i as u64);
                Ok(with_bootstrap(e, &c, args.bootstrap, coverage, seed))
            });
            match result {
                Ok(e) => EstimateRow::new(width, EstimateColumns::of(Some(&e)), None),
                Err(e) => EstimateRow::new(width, EstimateColumns::default(), Some(e.to_string())),
            }
        })
        .collect())
}

fn gap_label(gap: Gap) -> &'static str {
    match gap {
        Gap::NoEvents => "no_events",
        Gap::ZeroVariance => "zero_variance",
        Gap::TooFewWindows => "too_few_windows",
    }
}

estimate_row!(PeriodRow {
    period_start: f64,
    date: NaiveDate,
    width: f64,
} tail {
    gap: Option<&'static str>,
});

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    pub bucket: String,
    pub median_n_tilde: f64,
    pub periods: usize,
}

pub struct ReflexivityOutput {
    pub periods: Vec<PeriodRow>,
    pub buckets: Vec<BucketRow>,
}

pub fn reflexivity(args: &ReflexivityArgs) -> Result<ReflexivityOutput> {
    let (prepared, offset) = prepare(&args.input, &args.session)?;
    let date_of = |t: f64| -> Option<NaiveDate> {
        match &prepared {
            Prepared::Raw(_) => local_date(t, offset),
            Prepared::Stitched(_, b) | Prepared::Binned(b) => b.date_at(t),
        }
    };
    let first = match &prepared {
        Prepared::Raw(s) | Prepared::Stitched(s, _) => s.horizon().begin,
        Prepared::Binned(_) => 0.0,
    };
    let t0 = match args.t0 {
        Some(d) => d,
        None => date_of(first).context("cannot date the first event")?,
    };
    let width_at = |t: f64| -> f64 {
        if !args.moore {
            return args.window;
        }
        date_of(t)
            .and_then(|d| moores_law_window(d, args.w0, t0, args.halving).ok())
            .unwrap_or(args.w0)
    };

    let estimates: Vec<PeriodEstimate> = match &prepared {
        Prepared::Raw(s) | Prepared::Stitched(s, _) => {
            ensure!(args.moore || args.period >= 2.0 * args.window, "period must be at least twice the window");
            rolling_estimates_with(s, args.period, width_at)?
        }
        Prepared::Binned(b) => {
            ensure!(
                !args.moore,
                "--moore with --deseasonalize is not supported: shrinking windows fall below the bin width"
            );
            if args.bootstrap > 0 {
                log::warn!("bootstrap intervals are not computed on de-seasonalized bins");
            }
            binned_rolling_estimates(b, args.period, args.window)?
        }
    };

    let series = match &prepared {
        Prepared::Raw(s) | Prepared::Stitched(s, _) => Some(s),
        Prepared::Binned(_) => None,
    };
    let periods: Vec<PeriodRow> = estimates
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let width = p.result.as_ref().map_or_else(|_| width_at(p.start), |e| e.width);
            let estimate = match (&p.result, series) {
                (Ok(e), Some(s)) if args.bootstrap > 0 => {
                    let end = p.start + e.m as f64 * e.width;
                    let boot = s
                        .restrict(p.start, end)
                        .and_then(|part| window_counts(&part, e.width))
                        .map(|c| with_bootstrap(*e, &c, args.bootstrap, (0.1, 0.9), member_seed(args.common.seed, k as u64)));
                    boot.unwrap_or(*e)
                }
                (Ok(e), _) => *e,
                (Err(_), _) => {
                    let date = date_of(p.start).context("undated period")?;
                    let gap = p.result.err().map(gap_label);
                    return Ok(PeriodRow::new(p.start, date, width, EstimateColumns::default(), gap));
                }
            };
            let date = date_of(p.start).context("undated period")?;
            Ok(PeriodRow::new(p.start, date, width, EstimateColumns::of(Some(&estimate)), None))
        })
        .collect::<Result<_>>()?;

    let buckets = aggregate_median(
        periods
            .iter()
            .map(|p| (month_bucket(p.date, args.bucket_months), p.n_tilde)),
    )
    .into_iter()
    .map(|b| BucketRow {
        bucket: format!("{:04}-{:02}", b.bucket.0, b.bucket.1),
        median_n_tilde: b.median,
        periods: b.count,
    })
    .collect();
    Ok(ReflexivityOutput { periods, buckets })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub period_start: f64,
    pub period_end: f64,
    pub events: usize,
    pub mu_hat: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub n_hat: Option<f64>,
    pub loglik: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub gap: Option<String>,
}

pub fn fit_mle(args: &FitMleArgs) -> Result<Vec<FitRow>> {
    let mut series = pipeline::load_events(&args.input.input, args.input.format)
        .with_context(|| format!("loading {}", args.input.input.display()))?;
    if let Some(interval) = args.randomize {
        series = randomize_timestamps(&series, interval, args.common.seed)?;
    }
    let h = series.horizon();
    let bounds: Vec<(f64, f64)> = match args.period {
        None => vec![(h.begin, h.end)],
        Some(p) => {
            ensure!(p > 0.0, "period must be > 0");
            let count = (h.len() / p).floor() as usize;
            (0..count).map(|k| (h.begin + k as f64 * p, h.begin + (k + 1) as f64 * p)).collect()
        }
    };
    let rows = ensemble::run(args.common.seed, bounds.len(), args.common.workers, |k, _| {
        let (start, end) = bounds[k];
        let empty = |events: usize, gap: String| FitRow {
            period_start: start,
            period_end: end,
            events,
            mu_hat: None,
            alpha_hat: None,
            beta_hat: None,
            n_hat: None,
            loglik: None,
            converged: None,
            iterations: None,
            gap: Some(gap),
        };
        let part = match series.restrict(start, end) {
            Ok(p) => p,
            Err(e) => return empty(0, e.to_string()),
        };
        if part.len() < MIN_FIT_EVENTS {
            return empty(part.len(), "too_few_events".into());
        }
        match fit_mle_exp(&part, None, &MleOptions::default()) {
            Ok(f) => FitRow {
                period_start: start,
                period_end: end,
                events: part.len(),
                mu_hat: Some(f.mu_hat),
                alpha_hat: Some(f.alpha_hat),
                beta_hat: Some(f.beta_hat),
                n_hat: Some(f.n_hat()),
                loglik: Some(f.log_likelihood),
                converged: Some(f.converged),
                iterations: Some(f.iterations),
                gap: None,
            },
            Err(e) => empty(part.len(), e.to_string()),
        }
    });
    Ok(rows)
}

/// One built-in self-test outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The `n = 0` row must bracket 0 and have a median within ±0.05.
pub fn check_sweep_n(rows: &[SweepNRow]) -> Vec<Check> {
    let Some(row) = rows.iter().find(|r| r.n == 0.0) else {
        log::warn!("n = 0 not in the grid; Poisson self-test skipped");
        return Vec::new();
    };
    let (lo, med, hi) = (
        row.q05.unwrap_or(f64::NAN),
        row.median.unwrap_or(f64::NAN),
        row.q95.unwrap_or(f64::NAN),
    );
    vec![
        Check {
            name: "poisson band contains 0".into(),
            passed: lo <= 0.0 && 0.0 <= hi,
            detail: format!("[{lo:.4}, {hi:.4}]"),
        },
        Check {
            name: "poisson median within 0.05".into(),
            passed: med.abs() <= 0.05,
            detail: format!("median {med:.4}"),
        },
    ]
}

/// Plateau floor at the largest window and the fitted exponent.
pub fn check_powerlaw(out: &PowerlawOutput) -> Vec<Check> {
    let f = &out.fit;
    let epsilon = match out.resolved.params.kernel {
        reflex_core::KernelSpec::PowerLawOmori { epsilon, .. } => epsilon,
        _ => f64::NAN,
    };
    vec![
        Check {
            name: "plateau stays above 1 - n".into(),
            passed: f.largest_q05 >= f.floor,
            detail: format!("q05 {:.4} at W={} vs floor {:.4}", f.largest_q05, f.largest_width, f.floor),
        },
        Check {
            name: "scaling slope within 0.1 of -epsilon".into(),
            passed: (f.slope + epsilon).abs() <= 0.1,
            detail: format!("slope {:.4} over [{}, {}], epsilon {epsilon}", f.slope, f.w_min, f.w_max),
        },
    ]
}
