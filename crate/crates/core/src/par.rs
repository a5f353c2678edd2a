//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled, [`Exec::Parallel`] runs on the rayon
//! global pool. Without it, both modes run sequentially. Reductions go
//! through fixed-size chunks folded in chunk order, so results are
//! bit-identical for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per reduction chunk. Part of the numeric contract: changing it
/// changes the floating-point summation order.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();

    #[cfg(not(feature = "parallel"))]
    return 1;
}

/// Order-preserving map over a slice.
pub fn map<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over an index range.
pub fn map_range<U, F>(exec: Exec, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Chunked reduction over `0..n`.
///
/// `fold` builds one accumulator per [`CHUNK`] of indices; the chunk
/// accumulators are then merged left to right with `merge`.
pub fn chunked_reduce<A, F, M>(exec: Exec, n: usize, fold: F, merge: M) -> Option<A>
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync + Send,
    M: Fn(A, A) -> A,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = map_range(exec, chunks, |c| {
        let start = c * CHUNK;
        fold(start..(start + CHUNK).min(n))
    });
    parts.into_iter().reduce(merge)
}
