//! Ingestion and preprocessing of empirical event timestamps: file
//! loading, stitching of regular-session bins onto a gap-free axis,
//! intraday de-seasonalization and the Moore's-law window schedule.
//!
//! Timestamps are seconds since the Unix epoch (UTC). Sessions are
//! described in local time by a fixed UTC offset.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Months, NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{period_from_counts, PeriodEstimate, WindowCounts};
use crate::series::{jitter_ties, EventSeries, Horizon};

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormat {
    /// Decimal seconds.
    SecondsFloat,
    /// Integer nanoseconds since the Unix epoch.
    EpochNanos,
}

impl std::str::FromStr for TimeFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "seconds" | "seconds-float" => Ok(Self::SecondsFloat),
            "epoch-ns" | "epoch-nanos" | "epoch-nanoseconds" => Ok(Self::EpochNanos),
            other => Err(format!("unknown time format {other:?}")),
        }
    }
}

fn parse_time(field: &str, format: TimeFormat) -> Option<f64> {
    match format {
        TimeFormat::SecondsFloat => field.parse::<f64>().ok().filter(|t| t.is_finite()),
        TimeFormat::EpochNanos => field.parse::<i64>().ok().map(|ns| {
            let secs = ns.div_euclid(1_000_000_000);
            let rem = ns.rem_euclid(1_000_000_000);
            secs as f64 + rem as f64 * 1e-9
        }),
    }
}

/// Reads one timestamp per line. Blank lines and `#` comments are skipped;
/// a `# horizon: begin,end` comment sets the observation interval and a
/// non-numeric first line is taken as a header. Without a horizon comment
/// the interval is `[min, max]` of the timestamps.
pub fn load_events(path: &Path, format: TimeFormat) -> Result<EventSeries> {
    let reader = BufReader::new(File::open(path)?);
    let mut times = Vec::new();
    let mut horizon = None;
    let mut seen_data_line = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            if let Some(spec) = comment.trim().strip_prefix("horizon:") {
                horizon = Some(parse_horizon(spec, format).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("bad horizon metadata {spec:?}"),
                })?);
            }
            continue;
        }
        let field = text.split(',').next().unwrap_or("").trim();
        match parse_time(field, format) {
            Some(t) => times.push(t),
            None if !seen_data_line && field.chars().any(|c| c.is_ascii_alphabetic()) => {}
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("cannot parse timestamp {field:?}"),
                })
            }
        }
        seen_data_line = true;
    }
    if times.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        log::warn!("{}: timestamps not sorted; sorting", path.display());
        times.sort_by(f64::total_cmp);
    }
    let ties = jitter_ties(&mut times);
    if ties > 0 {
        log::warn!("{}: broke {ties} tied timestamps", path.display());
    }
    match horizon {
        Some(h) => EventSeries::new(times, h),
        None => EventSeries::from_times(times),
    }
}

fn parse_horizon(spec: &str, format: TimeFormat) -> Option<Horizon> {
    let (a, b) = spec.split_once(',')?;
    Horizon::new(parse_time(a.trim(), format)?, parse_time(b.trim(), format)?).ok()
}

/// Writes the event CSV read by [`load_events`] (decimal seconds, with the
/// horizon recorded in a comment). Floats use shortest round-trip form.
pub fn write_events<W: Write>(out: &mut W, series: &EventSeries) -> Result<()> {
    let h = series.horizon();
    writeln!(out, "# horizon: {},{}", h.begin, h.end)?;
    writeln!(out, "timestamp")?;
    for t in series.times() {
        writeln!(out, "{t}")?;
    }
    Ok(())
}

/// Regular trading session in local time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub timezone: String,
    /// Local time minus UTC, in seconds.
    pub utc_offset: i32,
    pub bin_width: f64,
}

impl SessionSpec {
    pub fn new(start: NaiveTime, end: NaiveTime, timezone: &str, utc_offset: i32, bin_width: f64) -> Result<Self> {
        let spec = Self {
            start,
            end,
            timezone: timezone.to_string(),
            utc_offset,
            bin_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 09:30–16:00 at UTC−5 with 5-minute bins.
    pub fn us_equity_regular() -> Self {
        Self {
            start: NaiveTime::from_hms_opt(9, 30, 0).expect("valid time"),
            end: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
            timezone: "EST".into(),
            utc_offset: -5 * 3600,
            bin_width: 300.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::InvalidParameter(format!(
                "session start {} must precede end {}",
                self.start, self.end
            )));
        }
        if self.bin_width.is_nan() || self.bin_width <= 0.0 {
            return Err(Error::InvalidParameter("bin width must be > 0".into()));
        }
        let slots = self.length() / self.bin_width;
        if (slots - slots.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "bin width {} does not divide the {}s session",
                self.bin_width,
                self.length()
            )));
        }
        Ok(())
    }

    fn start_seconds(&self) -> f64 {
        f64::from(self.start.num_seconds_from_midnight())
    }

    fn end_seconds(&self) -> f64 {
        f64::from(self.end.num_seconds_from_midnight())
    }

    pub fn length(&self) -> f64 {
        self.end_seconds() - self.start_seconds()
    }

    pub fn slots(&self) -> usize {
        (self.length() / self.bin_width).round() as usize
    }

    /// Local date and session slot of a UTC timestamp, when in session.
    fn locate(&self, t: f64) -> Option<(NaiveDate, usize, f64)> {
        let local = t + f64::from(self.utc_offset);
        let day = (local / SECONDS_PER_DAY).floor();
        let tod = local - day * SECONDS_PER_DAY;
        if tod < self.start_seconds() || tod >= self.end_seconds() {
            return None;
        }
        let into = tod - self.start_seconds();
        let slot = ((into / self.bin_width) as usize).min(self.slots() - 1);
        let date = epoch_day_to_date(day as i64)?;
        Some((date, slot, into - slot as f64 * self.bin_width))
    }
}

pub fn epoch_day_to_date(day: i64) -> Option<NaiveDate> {
    DateTime::from_timestamp(day.checked_mul(86_400)?, 0).map(|d| d.date_naive())
}

/// Local calendar date of a UTC timestamp.
pub fn local_date(t: f64, utc_offset: i32) -> Option<NaiveDate> {
    epoch_day_to_date(((t + f64::from(utc_offset)) / SECONDS_PER_DAY).floor() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bin {
    /// Position on the stitched axis; the bin covers `[index·w, (index+1)·w)`.
    pub index: usize,
    pub date: NaiveDate,
    pub slot: usize,
    pub raw_count: u64,
    pub adjusted_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSeries {
    pub bins: Vec<Bin>,
    pub bin_width: f64,
    pub slots: usize,
    pub adjusted: bool,
}

impl BinnedSeries {
    pub fn total_raw(&self) -> u64 {
        self.bins.iter().map(|b| b.raw_count).sum()
    }

    pub fn total_adjusted(&self) -> f64 {
        self.bins.iter().map(|b| b.adjusted_count).sum()
    }

    /// Calendar date of a point on the stitched axis.
    pub fn date_at(&self, stitched: f64) -> Option<NaiveDate> {
        let k = (stitched / self.bin_width).floor();
        if k < 0.0 {
            return None;
        }
        let k = (k as usize).min(self.bins.len().checked_sub(1)?);
        Some(self.bins[k].date)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "slot", "raw_count", "adjusted_count"])?;
        for b in &self.bins {
            w.write_record([
                b.date.to_string(),
                b.slot.to_string(),
                b.raw_count.to_string(),
                b.adjusted_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts in-session events per (date, slot), drops empty bins and lays
/// the rest end to end on a continuous axis.
pub fn stitch_sessions(series: &EventSeries, spec: &SessionSpec) -> Result<BinnedSeries> {
    stitch_events(series, spec).map(|(_, binned)| binned)
}

/// [`stitch_sessions`] together with the in-session events mapped onto the
/// stitched axis (each keeps its offset inside its bin).
pub fn stitch_events(series: &EventSeries, spec: &SessionSpec) -> Result<(EventSeries, BinnedSeries)> {
    spec.validate()?;
    let mut cells: BTreeMap<(NaiveDate, usize), Vec<f64>> = BTreeMap::new();
    for &t in series.times() {
        if let Some((date, slot, offset)) = spec.locate(t) {
            cells.entry((date, slot)).or_default().push(offset);
        }
    }
    if cells.is_empty() {
        return Err(Error::NoBins);
    }
    let mut bins = Vec::with_capacity(cells.len());
    let mut stitched = Vec::with_capacity(series.len());
    for (index, ((date, slot), offsets)) in cells.into_iter().enumerate() {
        let base = index as f64 * spec.bin_width;
        stitched.extend(offsets.iter().map(|o| base + o));
        bins.push(Bin {
            index,
            date,
            slot,
            raw_count: offsets.len() as u64,
            adjusted_count: offsets.len() as f64,
        });
    }
    let end = bins.len() as f64 * spec.bin_width;
    jitter_ties(&mut stitched);
    while stitched.last().is_some_and(|&t| t > end) {
        stitched.pop();
    }
    let events = EventSeries::new(stitched, Horizon::new(0.0, end)?)?;
    Ok((
        events,
        BinnedSeries {
            bins,
            bin_width: spec.bin_width,
            slots: spec.slots(),
            adjusted: false,
        },
    ))
}

pub const DEFAULT_MIN_DAYS: usize = 20;

/// Divides each bin by its slot's share of the intraday activity profile.
/// Profiles are computed separately for each calendar year and normalized
/// to mean 1 across slots.
pub fn deseasonalize(binned: &BinnedSeries, min_days: usize) -> Result<BinnedSeries> {
    let mut by_year: BTreeMap<i32, Vec<(u64, usize)>> = BTreeMap::new();
    for b in &binned.bins {
        let stats = by_year.entry(b.date.year()).or_insert_with(|| vec![(0, 0); binned.slots]);
        stats[b.slot].0 += b.raw_count;
        stats[b.slot].1 += 1;
    }
    let mut factors: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (year, stats) in &by_year {
        let zero: Vec<usize> = (0..binned.slots).filter(|&s| stats[s].0 == 0).collect();
        if !zero.is_empty() {
            return Err(Error::ZeroSlots(zero));
        }
        let thin: Vec<usize> = (0..binned.slots).filter(|&s| stats[s].1 < min_days).collect();
        if !thin.is_empty() {
            return Err(Error::InsufficientDays {
                slots: thin,
                floor: min_days,
            });
        }
        let means: Vec<f64> = stats.iter().map(|&(c, d)| c as f64 / d as f64).collect();
        let overall = means.iter().sum::<f64>() / means.len() as f64;
        factors.insert(*year, means.iter().map(|m| m / overall).collect());
    }
    let bins = binned
        .bins
        .iter()
        .map(|b| Bin {
            adjusted_count: b.raw_count as f64 / factors[&b.date.year()][b.slot],
            ..b.clone()
        })
        .collect();
    Ok(BinnedSeries {
        bins,
        adjusted: true,
        ..binned.clone()
    })
}

/// Sums `W / bin_width` consecutive bins into each window.
pub fn binned_window_counts(binned: &BinnedSeries, width: f64) -> Result<WindowCounts> {
    let k = bins_per(width, binned.bin_width)?;
    let values: Vec<f64> = binned
        .bins
        .iter()
        .map(|b| if binned.adjusted { b.adjusted_count } else { b.raw_count as f64 })
        .collect();
    let counts: Vec<f64> = values.chunks_exact(k).map(|c| c.iter().sum()).collect();
    if counts.len() < 2 {
        return Err(Error::TooFewWindows {
            required: 2,
            got: counts.len(),
        });
    }
    let span = Horizon::new(0.0, counts.len() as f64 * width)?;
    Ok(WindowCounts {
        adjusted: binned.adjusted,
        ..WindowCounts::new(width, counts, span)
    })
}

/// Rolling estimates over a binned series: consecutive periods of
/// `period / bin_width` bins, each split into windows of `W / bin_width`
/// bins. Period starts are positions on the stitched axis.
pub fn binned_rolling_estimates(binned: &BinnedSeries, period: f64, width: f64) -> Result<Vec<PeriodEstimate>> {
    let per_window = bins_per(width, binned.bin_width)?;
    let per_period = bins_per(period, binned.bin_width)?;
    if per_period < 2 * per_window {
        return Err(Error::InvalidParameter(format!(
            "period {period} must be at least twice the window {width}"
        )));
    }
    let windows = per_period / per_window;
    let values: Vec<f64> = binned
        .bins
        .iter()
        .map(|b| if binned.adjusted { b.adjusted_count } else { b.raw_count as f64 })
        .collect();
    Ok(values
        .chunks_exact(per_period)
        .enumerate()
        .map(|(k, chunk)| {
            let start = (k * per_period) as f64 * binned.bin_width;
            let counts: Vec<f64> = chunk
                .chunks_exact(per_window)
                .take(windows)
                .map(|c| c.iter().sum())
                .collect();
            let span = Horizon {
                begin: start,
                end: start + windows as f64 * width,
            };
            let counts = WindowCounts {
                adjusted: binned.adjusted,
                ..WindowCounts::new(width, counts, span)
            };
            period_from_counts(start, &counts)
        })
        .collect())
}

fn bins_per(length: f64, bin_width: f64) -> Result<usize> {
    let ratio = length / bin_width;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 {
        return Err(Error::WindowNotMultiple {
            window: length,
            bin: bin_width,
            nearest: k.max(1.0) * bin_width,
        });
    }
    Ok(k as usize)
}

fn shift_months(date: NaiveDate, months: i32) -> Option<NaiveDate> {
    if months >= 0 {
        date.checked_add_months(Months::new(months as u32))
    } else {
        date.checked_sub_months(Months::new(months.unsigned_abs()))
    }
}

/// Signed month difference `t − t0`: whole calendar months plus the
/// elapsed fraction of the following month, by day count.
pub fn months_between(t0: NaiveDate, t: NaiveDate) -> f64 {
    let mut whole = (t.year() - t0.year()) * 12 + t.month() as i32 - t0.month() as i32;
    let mut anchor = shift_months(t0, whole).expect("date in range");
    if anchor > t {
        whole -= 1;
        anchor = shift_months(t0, whole).expect("date in range");
    }
    let next = shift_months(t0, whole + 1).expect("date in range");
    let elapsed = (t - anchor).num_days() as f64;
    let span = (next - anchor).num_days() as f64;
    f64::from(whole) + elapsed / span
}

/// `W_t = W0 · 2^{−(t − t0)/halving}` with `t − t0` in months.
pub fn moores_law_window(t: NaiveDate, w0: f64, t0: NaiveDate, halving_months: f64) -> Result<f64> {
    moores_law_window_months(months_between(t0, t), w0, halving_months)
}

/// [`moores_law_window`] on a month offset. The whole number of halvings is
/// applied as an exact power of two.
pub fn moores_law_window_months(delta_months: f64, w0: f64, halving_months: f64) -> Result<f64> {
    if !(halving_months > 0.0 && halving_months.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "halving period must be > 0, got {halving_months}"
        )));
    }
    let halvings = delta_months.div_euclid(halving_months);
    let rest = delta_months.rem_euclid(halving_months);
    Ok(w0 * (-rest / halving_months).exp2() * 2f64.powi(-(halvings as i32)))
}

/// Calendar bucket of `months` months containing `date`, labelled by its
/// first month (`YYYY-MM`). Buckets align to January.
pub fn month_bucket(date: NaiveDate, months: u32) -> (i32, u32) {
    let months = months.max(1);
    let index = (date.month() - 1) / months * months;
    (date.year(), index + 1)
}
