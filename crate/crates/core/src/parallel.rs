//! Deterministic parallel reduction.
//!
//! Work is split into fixed-size chunks whose boundaries depend only on the
//! item count. Chunk results are merged left to right, so the floating-point
//! result is identical for every worker count.

use rayon::prelude::*;

/// Items per chunk.
pub const CHUNK: usize = 512;

/// Maps each chunk `[start, end)` to an accumulator and merges them in order.
pub fn chunked_reduce<A, F, M>(count: usize, map: F, merge: M) -> Option<A>
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync,
    M: Fn(A, A) -> A,
{
    let chunks: Vec<std::ops::Range<usize>> = (0..count).step_by(CHUNK).map(|s| s..(s + CHUNK).min(count)).collect();
    let partials: Vec<A> = chunks.into_par_iter().map(&map).collect();
    partials.into_iter().reduce(merge)
}

/// Parallel map preserving order.
pub fn ordered_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Runs `f` inside a pool with `workers` threads (`0` means all cores).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(f)
}
