use std::path::PathBuf;

use chrono::{NaiveDate, NaiveTime};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reflex_core::{HawkesParams, KernelSpec, SessionSpec, TimeFormat};
use serde::Serialize;

#[derive(Debug, Clone, Parser)]
#[command(name = "reflex", version, about = "Hawkes branching-ratio experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a Hawkes process and write its event times.
    Simulate(SimulateArgs),
    /// Mean-variance estimate across a grid of branching ratios.
    SweepN(SweepNArgs),
    /// Mean-variance estimate across a grid of window sizes.
    SweepW(SweepWArgs),
    /// Window-size scaling of a near-critical power-law process.
    Powerlaw(PowerlawArgs),
    /// Rolling estimates on an event file, aggregated into calendar buckets.
    Reflexivity(ReflexivityArgs),
    /// Exponential-kernel maximum-likelihood fits on an event file.
    FitMle(FitMleArgs),
    /// One-shot mean-variance estimate on an event file.
    Estimate(EstimateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::SweepN(_) => "sweep-n",
            Command::SweepW(_) => "sweep-w",
            Command::Powerlaw(_) => "powerlaw",
            Command::Reflexivity(_) => "reflexivity",
            Command::FitMle(_) => "fit-mle",
            Command::Estimate(_) => "estimate",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::SweepN(a) => &a.common,
            Command::SweepW(a) => &a.common,
            Command::Powerlaw(a) => &a.common,
            Command::Reflexivity(a) => &a.common,
            Command::FitMle(a) => &a.common,
            Command::Estimate(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed; ensemble member i uses seed ^ i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Ensemble size (default depends on the subcommand).
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Exit non-zero when a built-in self-test fails.
    #[arg(long)]
    pub check: bool,
}

impl Common {
    pub fn ensemble_or(&self, default: usize) -> usize {
        self.ensemble.unwrap_or(default).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Null,
    Exponential,
    Omori,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Thinning,
    Branching,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProcessArgs {
    #[arg(long, value_enum, default_value_t = KernelKind::Exponential)]
    pub kernel: KernelKind,
    /// Branching ratio (kernel integral).
    #[arg(long, default_value_t = 0.5)]
    pub n: f64,
    /// Exponential decay rate.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Exponential amplitude; overrides --n.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Omori tail exponent.
    #[arg(long, default_value_t = 0.35)]
    pub epsilon: f64,
    /// Omori cutoff time.
    #[arg(long, default_value_t = 1.0)]
    pub tau0: f64,
    /// Target mean rate; sets mu = rate (1 - n) unless --mu is given.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Base intensity.
    #[arg(long)]
    pub mu: Option<f64>,
}

impl ProcessArgs {
    pub fn params(&self) -> reflex_core::Result<HawkesParams> {
        let kernel = match self.kernel {
            KernelKind::Null => KernelSpec::Null,
            KernelKind::Exponential => {
                let alpha = self.alpha.unwrap_or(self.n * self.beta);
                KernelSpec::exponential(alpha, self.beta)?
            }
            KernelKind::Omori => KernelSpec::omori(self.n, self.epsilon, self.tau0)?,
        };
        let mu = self.mu.unwrap_or(self.rate * (1.0 - kernel.integral()));
        HawkesParams::new(mu, kernel)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, default_value_t = 1e5)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    #[arg(long, value_enum, default_value_t = Method::Thinning)]
    pub method: Method,
    /// Largest admissible expected event count.
    #[arg(long, default_value_t = reflex_core::simulate::DEFAULT_EVENT_CAP)]
    pub event_cap: f64,
    /// History lag ignored by power-law thinning.
    #[arg(long)]
    pub truncation_lag: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepNArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,0.9")]
    pub n_grid: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 1e5)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e4)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 20.0)]
    pub window: f64,
    #[arg(long, value_enum, default_value_t = Method::Thinning)]
    pub method: Method,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepWArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.5,1,2,5,10,20,50,100,200,500,1000,2000,5000"
    )]
    pub w_grid: Vec<f64>,
    #[arg(long, default_value_t = 1e5)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e4)]
    pub burn_in: f64,
    #[arg(long, value_enum, default_value_t = Method::Thinning)]
    pub method: Method,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// n = 0.95, T = 1e6: minutes on a laptop.
    Desk,
    /// n = 0.99, mu = 0.01, T = 1e9: about 1e9 events, hours and gigabytes.
    Full,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerlawArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long, default_value_t = 0.35)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau0: f64,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Window grid; default 10^(k/4) from 1 up to 10^4.
    #[arg(long, value_delimiter = ',')]
    pub w_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    pub fit_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub fit_max: f64,
    #[arg(long, value_enum, default_value_t = Method::Branching)]
    pub method: Method,
    #[command(flatten)]
    pub common: Common,
}

/// Power-law settings after applying the preset.
#[derive(Debug, Clone, Serialize)]
pub struct PowerlawResolved {
    pub params: HawkesParams,
    pub horizon: f64,
    pub burn_in: f64,
    pub event_cap: f64,
    pub grid: Vec<f64>,
    pub ensemble: usize,
}

impl PowerlawArgs {
    pub fn resolve(&self) -> reflex_core::Result<PowerlawResolved> {
        let (n, horizon, burn_in, cap, ensemble) = match self.preset {
            Preset::Desk => (0.95, 1e6, 5e5, reflex_core::simulate::DEFAULT_EVENT_CAP, 10),
            Preset::Full => (0.99, 1e9, 5e8, 2e9, 1),
        };
        let n = self.n.unwrap_or(n);
        let kernel = KernelSpec::omori(n, self.epsilon, self.tau0)?;
        let params = HawkesParams::new(self.mu.unwrap_or(1.0 - n), kernel)?;
        let grid = self
            .w_grid
            .clone()
            .unwrap_or_else(|| (0..=16).map(|k| 10f64.powf(k as f64 / 4.0)).collect());
        Ok(PowerlawResolved {
            params,
            horizon: self.horizon.unwrap_or(horizon),
            burn_in: self.burn_in.unwrap_or(burn_in),
            event_cap: cap,
            grid,
            ensemble: self.common.ensemble_or(ensemble),
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Event file, one timestamp per line.
    #[arg(long)]
    pub input: PathBuf,
    /// seconds | epoch-ns
    #[arg(long, default_value = "seconds")]
    pub format: TimeFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SessionArgs {
    /// Keep only in-session events and stitch the non-empty bins end to end.
    #[arg(long)]
    pub session: bool,
    #[arg(long, default_value = "09:30")]
    pub session_start: String,
    #[arg(long, default_value = "16:00")]
    pub session_end: String,
    /// Local time minus UTC, in hours; also used to date events.
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    pub utc_offset_hours: f64,
    #[arg(long, default_value = "EST")]
    pub timezone: String,
    #[arg(long, default_value_t = 300.0)]
    pub bin_width: f64,
    /// Divide bins by the per-year intraday profile (needs --session).
    #[arg(long)]
    pub deseasonalize: bool,
    /// Days required per intraday slot for de-seasonalization.
    #[arg(long, default_value_t = reflex_core::pipeline::DEFAULT_MIN_DAYS)]
    pub min_days: usize,
}

fn parse_hhmm(s: &str) -> anyhow::Result<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .map_err(|e| anyhow::anyhow!("bad time of day {s:?}: {e}"))
}

impl SessionArgs {
    pub fn utc_offset(&self) -> i32 {
        (self.utc_offset_hours * 3600.0).round() as i32
    }

    pub fn spec(&self) -> anyhow::Result<Option<SessionSpec>> {
        if !self.session {
            anyhow::ensure!(!self.deseasonalize, "--deseasonalize requires --session");
            return Ok(None);
        }
        Ok(Some(SessionSpec::new(
            parse_hhmm(&self.session_start)?,
            parse_hhmm(&self.session_end)?,
            &self.timezone,
            self.utc_offset(),
            self.bin_width,
        )?))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReflexivityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub session: SessionArgs,
    /// Fixed window in seconds (ignored with --moore).
    #[arg(long, default_value_t = 30.0)]
    pub window: f64,
    /// Shrink the window as W0 2^(-(t - t0)/halving).
    #[arg(long)]
    pub moore: bool,
    #[arg(long, default_value_t = 30.0)]
    pub w0: f64,
    /// Reference date for --moore (default: date of the first event).
    #[arg(long)]
    pub t0: Option<NaiveDate>,
    /// Halving period in months.
    #[arg(long, default_value_t = 18.0)]
    pub halving: f64,
    #[arg(long, default_value_t = 900.0)]
    pub period: f64,
    #[arg(long, default_value_t = 2)]
    pub bucket_months: u32,
    /// Bootstrap replicates per period (0: no intervals).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitMleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Redraw each timestamp uniformly inside its reporting interval.
    #[arg(long)]
    pub randomize: Option<f64>,
    /// Fit consecutive periods of this length instead of the whole file.
    #[arg(long)]
    pub period: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub session: SessionArgs,
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub window: Vec<f64>,
    /// Bootstrap replicates (0: no interval).
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.9")]
    pub coverage: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}
