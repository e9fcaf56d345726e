//! Replica execution, parallel when the `parallel` feature is enabled.
//!
//! Work is keyed by replica index and every replica derives its randomness
//! from `(master seed, index)` alone, so the merged output is identical for
//! any worker count, including the sequential fallback.

/// Run `f` for indices `0..count` sequentially.
pub fn map_indexed_seq<T, F>(count: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count).map(f).collect()
}

/// Run `f` for indices `0..count`, in parallel when available. Results are
/// returned in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_indexed_seq(count, f)
}

/// Like [`map_indexed`] but on a dedicated pool of `workers` threads.
/// `workers = 0` uses the global default; `workers = 1` is sequential.
#[cfg(feature = "parallel")]
pub fn map_indexed_workers<T, F>(count: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match workers {
        0 => map_indexed(count, f),
        1 => map_indexed_seq(count, f),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("building worker pool");
            pool.install(|| map_indexed(count, f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed_workers<T, F>(count: u64, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_indexed_seq(count, f)
}

/// Run `f` with the global parallelism capped at `workers` threads
/// (0 = default). Everything inside that calls [`map_indexed`] inherits the
/// cap.
#[cfg(feature = "parallel")]
pub fn with_workers<T, F>(workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match workers {
        0 => f(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("building worker pool")
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T, F>(_workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_count_does_not_change_results() {
        let f = |i: u64| i * i + 1;
        let seq = map_indexed_seq(100, f);
        assert_eq!(map_indexed(100, f), seq);
        assert_eq!(map_indexed_workers(100, 1, f), seq);
        assert_eq!(map_indexed_workers(100, 4, f), seq);
    }
}
