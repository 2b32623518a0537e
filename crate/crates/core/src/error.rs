use std::path::PathBuf;

/// Errors produced by the simulation, estimation and ingestion routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid event series: {0}")]
    InvalidSeries(String),

    #[error("lag must be non-negative, got {0}")]
    NegativeLag(f64),

    #[error("process is not stationary: branching ratio {0} >= 1")]
    NonStationary(f64),

    #[error("expected event count {expected:.3e} exceeds the safety cap of {cap:.3e}")]
    EventCapExceeded { expected: f64, cap: f64 },

    #[error("need at least {required} complete windows, got {got}")]
    TooFewWindows { required: usize, got: usize },

    #[error("window counts have zero sample variance")]
    DegenerateVariance,

    #[error("window counts have zero mean (no events)")]
    DegenerateMean,

    #[error("need at least {required} events, got {got}")]
    TooFewEvents { required: usize, got: usize },

    #[error("{degenerate} of {total} bootstrap replicates were degenerate")]
    BootstrapDegenerate { degenerate: usize, total: usize },

    #[error("scaling fit: {0}")]
    ScalingFit(String),

    #[error("window {window}s is not a multiple of the {bin}s bin width; nearest valid window is {nearest}s")]
    WindowNotMultiple { window: f64, bin: f64, nearest: f64 },

    #[error("slots {slots:?} have fewer than {floor} days of data")]
    InsufficientDays { slots: Vec<usize>, floor: usize },

    #[error("slots {0:?} have zero total count")]
    ZeroSlots(Vec<usize>),

    #[error("no session bins contain events")]
    NoBins,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}: file contains no events")]
    EmptyFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
