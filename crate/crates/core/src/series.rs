//! Ordered event timestamps on an observation interval.

use crate::error::{Error, Result};

/// Closed observation interval `[begin, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub begin: f64,
    pub end: f64,
}

impl Horizon {
    pub fn new(begin: f64, end: f64) -> Result<Self> {
        if !(begin.is_finite() && end.is_finite()) || end <= begin {
            return Err(Error::InvalidSeries(format!(
                "horizon [{begin}, {end}] must be finite with end > begin"
            )));
        }
        Ok(Self { begin, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.begin
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.begin && t <= self.end
    }
}

/// Strictly increasing event times, all inside the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    times: Vec<f64>,
    horizon: Horizon,
}

impl EventSeries {
    /// Validates that `times` is strictly increasing and inside `horizon`.
    pub fn new(times: Vec<f64>, horizon: Horizon) -> Result<Self> {
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "timestamps not strictly increasing at index {}: {} then {}",
                w + 1,
                times[w],
                times[w + 1]
            )));
        }
        if let Some(&t) = times.iter().find(|&&t| !horizon.contains(t)) {
            return Err(Error::InvalidSeries(format!(
                "timestamp {t} outside horizon [{}, {}]",
                horizon.begin, horizon.end
            )));
        }
        Ok(Self { times, horizon })
    }

    /// Sorts, breaks ties and builds the series. Timestamps outside the
    /// horizon are rejected rather than clipped.
    pub fn from_unsorted(mut times: Vec<f64>, horizon: Horizon) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries("non-finite timestamp".into()));
        }
        times.sort_by(f64::total_cmp);
        jitter_ties(&mut times);
        Self::new(times, horizon)
    }

    /// Series with horizon `[min, max]` of the timestamps. Needs two
    /// distinct instants after tie-breaking.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        let mut times = times;
        times.sort_by(f64::total_cmp);
        jitter_ties(&mut times);
        match (times.first(), times.last()) {
            (Some(&a), Some(&b)) if b > a => {
                let horizon = Horizon::new(a, b)?;
                Self::new(times, horizon)
            }
            _ => Err(Error::InvalidSeries(
                "cannot infer a horizon from fewer than two distinct timestamps".into(),
            )),
        }
    }

    pub fn empty(horizon: Horizon) -> Self {
        Self {
            times: Vec::new(),
            horizon,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Empirical rate `N / (end - begin)`.
    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.horizon.len()
    }

    /// Events in `[from, to)`.
    pub fn slice(&self, from: f64, to: f64) -> &[f64] {
        let lo = self.times.partition_point(|&t| t < from);
        let hi = self.times.partition_point(|&t| t < to);
        &self.times[lo..hi.max(lo)]
    }

    /// Sub-series on `[from, to]`, keeping events with `from <= t < to`
    /// (plus an event exactly at `to` when `to` is the series end).
    pub fn restrict(&self, from: f64, to: f64) -> Result<Self> {
        let horizon = Horizon::new(from, to)?;
        let lo = self.times.partition_point(|&t| t < from);
        let hi = self.times.partition_point(|&t| t <= to);
        Self::new(self.times[lo..hi].to_vec(), horizon)
    }

    /// Translates events and horizon by `dt`.
    pub fn shifted(&self, dt: f64) -> Result<Self> {
        let horizon = Horizon::new(self.horizon.begin + dt, self.horizon.end + dt)?;
        let times = self.times.iter().map(|t| t + dt).collect();
        Self::from_unsorted(times, horizon)
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}

/// Makes a sorted slice strictly increasing by moving each tied value to
/// the next representable float above its predecessor, in input order.
/// Returns the number of adjusted entries.
pub fn jitter_ties(times: &mut [f64]) -> usize {
    let mut moved = 0;
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1].next_up();
            moved += 1;
        }
    }
    moved
}
