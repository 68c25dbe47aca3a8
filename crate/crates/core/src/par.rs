//! Canonical-order parallel search over flat index spaces.
//!
//! Every outer loop in the crate is phrased as "find the least index whose
//! probe reports something". With the `parallel` feature and more than one
//! thread the probes run on a rayon pool; the result is the same as the
//! sequential scan because only the least reporting index is kept.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Returns the least `i < len` for which `probe(i)` is `Some`, with its value.
pub fn find_first<T, F>(len: u64, threads: usize, probe: F) -> Option<(u64, T)>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 1 && len > 1 {
        return with_pool(threads, || {
            (0..len)
                .into_par_iter()
                .find_map_first(|i| probe(i).map(|v| (i, v)))
        });
    }
    let _ = threads;
    (0..len).find_map(|i| probe(i).map(|v| (i, v)))
}

/// Maps every item, preserving order.
pub fn map<I, T, F>(items: &[I], threads: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 1 && items.len() > 1 {
        return with_pool(threads, || items.par_iter().map(&f).collect());
    }
    let _ = threads;
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        // Fall back to the global pool if a dedicated one can't be spawned.
        Err(_) => op(),
    }
}

/// Whether this build can actually run probes concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
