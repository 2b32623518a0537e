//! Deterministic ensemble execution.
//!
//! Member `i` of an ensemble with master seed `s` is seeded with `s ^ i`.
//! Results come back in member order whatever the completion order.

use rayon::prelude::*;

/// Seed of ensemble member `index`.
pub fn member_seed(master: u64, index: u64) -> u64 {
    master ^ index
}

/// Runs `job(index, seed)` for `count` members on `workers` threads
/// (`None`: rayon's default pool).
pub fn run<T, F>(master: u64, count: usize, workers: Option<usize>, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    let work = || {
        (0..count)
            .into_par_iter()
            .map(|i| job(i, member_seed(master, i as u64)))
            .collect()
    };
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                work()
            }
        },
        None => work(),
    }
}
