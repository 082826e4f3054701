//! Worker pool for independent experiment cells. Results are collected in
//! input order, so the thread count never changes the output.

use rayon::prelude::*;

use crate::error::{LabError, Result};

pub const THREADS_ENV: &str = "NPIVLAB_THREADS";

/// Worker cap from `NPIVLAB_THREADS`; unset or 0 means one per core.
pub fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| LabError::config(format!("{THREADS_ENV} must be a nonnegative integer (got {v:?})"))),
    }
}

/// Applies `f` to every item on the pool and returns results in order.
pub fn map_cells<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap()?)
        .build()
        .map_err(|e| LabError::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}
