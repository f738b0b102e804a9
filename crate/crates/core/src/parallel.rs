//! Optional data parallelism, capped by the `DIFFEOFLOW_THREADS` environment
//! variable. `0` (the default) keeps every computation on the calling thread.
//!
//! Parallel maps only split independent outputs across threads; each output is
//! still reduced sequentially, so results are bit-identical to the sequential
//! evaluation.

use std::sync::OnceLock;

use rayon::prelude::*;

pub const THREADS_ENV: &str = "DIFFEOFLOW_THREADS";

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = configured_threads();
        if threads == 0 {
            return None;
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => Some(pool),
            Err(err) => {
                log::warn!("could not build a {threads}-thread pool ({err}); running sequentially");
                None
            }
        }
    })
    .as_ref()
}

/// Thread cap requested through the environment; unparsable values mean 0.
pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    // small inputs are not worth the dispatch
    match pool() {
        Some(pool) if n >= 64 => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        _ => (0..n).map(f).collect(),
    }
}
