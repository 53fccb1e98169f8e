//! Worker-count control for the rayon-backed passes.

use crate::{Error, Result};

/// Run `f` on a dedicated pool with exactly `workers` threads.
///
/// `workers == 0` means "use the global pool".
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
