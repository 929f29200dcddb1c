//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the `parallel` flag routes work through rayon;
//! without it every call runs on the current thread. Results are collected in
//! input order either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_collect<I, O, F>(items: Vec<I>, parallel: bool, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.into_par_iter().map(f).collect();
    }
    let _ = parallel;
    items.into_iter().map(f).collect()
}

/// True when called from inside a rayon pool worker.
pub(crate) fn on_worker_thread() -> bool {
    #[cfg(feature = "parallel")]
    return rayon::current_thread_index().is_some();
    #[cfg(not(feature = "parallel"))]
    false
}
