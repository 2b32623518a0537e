use chrono::{Datelike, Months, NaiveDate, NaiveTime, TimeZone, Utc};
use proptest::prelude::{prop_assert_eq, proptest};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use reflex_core::pipeline::{
    binned_window_counts, deseasonalize, load_events, moores_law_window, moores_law_window_months, stitch_events,
    stitch_sessions, write_events, DEFAULT_MIN_DAYS,
};
use reflex_core::{EventSeries, Horizon, SessionSpec, TimeFormat};

const OFFSET: i32 = -5 * 3600;

fn session_open(date: NaiveDate) -> f64 {
    let local = date.and_time(NaiveTime::from_hms_opt(9, 30, 0).unwrap());
    Utc.from_utc_datetime(&local).timestamp() as f64 - f64::from(OFFSET)
}

fn trading_days(first: NaiveDate, count: usize) -> Vec<NaiveDate> {
    first
        .iter_days()
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .take(count)
        .collect()
}

/// Poisson counts per 5-minute slot with an intraday profile, events placed
/// uniformly inside each bin.
fn seasonal_events(days: &[NaiveDate], profile: impl Fn(usize) -> f64, seed: u64) -> EventSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::new();
    for &d in days {
        let open = session_open(d);
        for slot in 0..78 {
            let k = Poisson::new(profile(slot)).unwrap().sample(&mut rng) as usize;
            for _ in 0..k {
                times.push(open + 300.0 * slot as f64 + rng.random::<f64>() * 300.0);
            }
        }
    }
    let h = Horizon::new(session_open(days[0]) - 86_400.0, session_open(*days.last().unwrap()) + 86_400.0).unwrap();
    EventSeries::from_unsorted(times, h).unwrap()
}

fn u_shape(slot: usize) -> f64 {
    let x = (slot as f64 + 0.5) / 78.0 * 2.0 - 1.0;
    30.0 * (0.5 + 1.5 * x * x)
}

#[test]
fn deseasonalize_flattens_u_shape() {
    let days = trading_days(NaiveDate::from_ymd_opt(2011, 3, 1).unwrap(), 40);
    let series = seasonal_events(&days, u_shape, 1);
    let spec = SessionSpec::us_equity_regular();
    let binned = stitch_sessions(&series, &spec).unwrap();
    assert_eq!(binned.bins.len(), 40 * 78);
    let adjusted = deseasonalize(&binned, DEFAULT_MIN_DAYS).unwrap();

    let slot_means = |values: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut sums = vec![0.0; 78];
        for (i, b) in adjusted.bins.iter().enumerate() {
            sums[b.slot] += values(i) / 40.0;
        }
        sums
    };
    let raw = slot_means(&|i| adjusted.bins[i].raw_count as f64);
    let flat = slot_means(&|i| adjusted.bins[i].adjusted_count);
    let grand = flat.iter().sum::<f64>() / 78.0;
    assert!(raw[0] / raw[39] > 3.0);
    for m in &flat {
        assert!((m / grand - 1.0).abs() < 0.02, "{m} vs {grand}");
    }
    let total = (adjusted.total_adjusted() - adjusted.total_raw() as f64).abs() / adjusted.total_raw() as f64;
    assert!(total < 0.02);
}

#[test]
fn stitching_keeps_session_events_and_drops_empty_bins() {
    let days = trading_days(NaiveDate::from_ymd_opt(2011, 11, 21).unwrap(), 3);
    // day two is a half-day: nothing after 13:00
    let profile_events = seasonal_events(&days, |_| 5.0, 2);
    let half_close = session_open(days[1]) + 3.5 * 3600.0;
    let half_end = session_open(days[1]) + 6.5 * 3600.0;
    let mut times: Vec<f64> = profile_events
        .times()
        .iter()
        .copied()
        .filter(|&t| !(t >= half_close && t < half_end))
        .collect();
    let night = session_open(days[0]) - 6.5 * 3600.0;
    times.push(night);
    let in_session = times.len() - 1;
    let series = EventSeries::from_unsorted(times, profile_events.horizon()).unwrap();

    let spec = SessionSpec::us_equity_regular();
    let (stitched, binned) = stitch_events(&series, &spec).unwrap();
    assert_eq!(binned.total_raw() as usize, in_session);
    assert_eq!(stitched.len(), in_session);
    assert_eq!(binned.bins.len(), 78 + 42 + 78);
    assert_eq!(stitched.horizon().len(), binned.bins.len() as f64 * 300.0);
    // the last morning bin of the half-day abuts the next day's open
    let b = &binned.bins[78 + 41];
    assert_eq!((b.date, b.slot), (days[1], 41));
    let next = &binned.bins[78 + 42];
    assert_eq!((next.date, next.slot, next.index), (days[2], 0, b.index + 1));

    let c = binned_window_counts(&binned, 600.0).unwrap();
    assert_eq!(c.total(), (0..c.m() * 2).map(|i| binned.bins[i].raw_count as f64).sum::<f64>());
}

#[test]
fn binned_pipeline_is_deterministic() {
    let days = trading_days(NaiveDate::from_ymd_opt(2012, 1, 2).unwrap(), 25);
    let run = || {
        let series = seasonal_events(&days, u_shape, 9);
        let binned = deseasonalize(&stitch_sessions(&series, &SessionSpec::us_equity_regular()).unwrap(), 20).unwrap();
        let mut out = Vec::new();
        binned.write_csv(&mut out).unwrap();
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn event_file_round_trip() {
    let series = seasonal_events(&trading_days(NaiveDate::from_ymd_opt(2012, 5, 1).unwrap(), 2), |_| 3.0, 4);
    let file = tempfile::NamedTempFile::new().unwrap();
    write_events(&mut std::fs::File::create(file.path()).unwrap(), &series).unwrap();
    let back = load_events(file.path(), TimeFormat::SecondsFloat).unwrap();
    assert_eq!(back, series);
}

#[test]
fn moores_law_halves_on_calendar_dates() {
    let t0 = NaiveDate::from_ymd_opt(2005, 3, 14).unwrap();
    let mut t = t0 - Months::new(36);
    let mut w = moores_law_window(t, 30.0, t0, 18.0).unwrap();
    assert_eq!(w, 120.0);
    for _ in 0..6 {
        let next_t = t + Months::new(18);
        let next_w = moores_law_window(next_t, 30.0, t0, 18.0).unwrap();
        assert_eq!(next_w / w, 0.5);
        assert!(moores_law_window(t + Months::new(1), 30.0, t0, 18.0).unwrap() < w);
        t = next_t;
        w = next_w;
    }
}

proptest! {
    #[test]
    fn moores_law_exact_halving(k in -4000i64..4000, w0 in 1.0f64..100.0) {
        let delta = k as f64 / 64.0;
        let a = moores_law_window_months(delta, w0, 18.0).unwrap();
        let b = moores_law_window_months(delta + 18.0, w0, 18.0).unwrap();
        prop_assert_eq!(b / a, 0.5);
    }
}
