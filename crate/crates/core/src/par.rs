//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) the batch helpers fan work out
//! over rayon's pool; without it they run the same closures sequentially.
//! Results are always collected in index order, and [`chunked_reduce`] uses
//! chunk boundaries that do not depend on the thread count, so both paths
//! produce bit-identical floating-point results.

/// Number of items folded sequentially inside one reduction chunk.
pub const REDUCE_CHUNK: usize = 8;

/// Maps `f` over `0..n`, sequentially.
pub fn map_range_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Maps `f` over `0..n` on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_range_par<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, in parallel when the feature is enabled.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_range_par(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_range_seq(n, f)
    }
}

/// Folds `0..n` in fixed-size chunks, then merges the chunk results in order.
///
/// `init` builds an empty accumulator, `fold` adds item `i` into it and
/// `merge` adds the second accumulator into the first.
pub fn chunked_reduce<A, I, F, M>(n: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize) + Sync + Send,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let mut acc = init();
        let end = ((c + 1) * REDUCE_CHUNK).min(n);
        for i in c * REDUCE_CHUNK..end {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Sequential twin of [`chunked_reduce`] with identical chunking.
pub fn chunked_reduce_seq<A, I, F, M>(n: usize, init: I, fold: F, merge: M) -> A
where
    I: Fn() -> A,
    F: Fn(&mut A, usize),
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let mut total = init();
    for c in 0..chunks {
        let mut acc = init();
        let end = ((c + 1) * REDUCE_CHUNK).min(n);
        for i in c * REDUCE_CHUNK..end {
            fold(&mut acc, i);
        }
        merge(&mut total, acc);
    }
    total
}
