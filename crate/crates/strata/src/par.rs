//! Data-parallel map helpers. The `parallel` feature routes the sweeps
//! through rayon; without it everything runs on one thread. Both code paths
//! are exported so the benches can compare them directly.

pub fn map_collect_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U + Sync + Send,
    T: Send,
    U: Send,
{
    items.into_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_collect_par<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U + Sync + Send,
    T: Send,
    U: Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Dispatches to rayon when the `parallel` feature is enabled.
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U + Sync + Send,
    T: Send,
    U: Send,
{
    #[cfg(feature = "parallel")]
    {
        map_collect_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_collect_seq(items, f)
    }
}

/// Caps the worker pool; a no-op in the sequential build.
pub fn configure_threads(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
    }
}
