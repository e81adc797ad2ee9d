//! Thin facade over rayon with a sequential fallback.
//!
//! Every helper here is deterministic: reductions are performed over
//! fixed-size index chunks that are combined in index order, so results are
//! bit-identical for any thread count and for the sequential build.

/// Chunk length used by all deterministic reductions.
pub(crate) const REDUCE_CHUNK: usize = 64;

/// Applies `f` to every row of a contiguous row-major buffer.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row<F>(data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row<F>(data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    for (i, row) in data.chunks_mut(row_len).enumerate() {
        f(i, row);
    }
}

/// Applies `f` to blocks of `rows_per_block` consecutive rows; the closure
/// receives the index of the first row and the block slice.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row_block<F>(data: &mut [f64], row_len: usize, rows_per_block: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(row_len * rows_per_block)
        .enumerate()
        .for_each(|(b, block)| f(b * rows_per_block, block));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row_block<F>(data: &mut [f64], row_len: usize, rows_per_block: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    for (b, block) in data.chunks_mut(row_len * rows_per_block).enumerate() {
        f(b * rows_per_block, block);
    }
}

/// Maps fixed-size index chunks and sums the per-chunk results in index
/// order. `map` receives a half-open index range.
pub(crate) fn sum_chunks<F>(len: usize, map: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let n_chunks = len.div_ceil(REDUCE_CHUNK);
    let partials = map_collect(n_chunks, |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(len);
        map(lo..hi)
    });
    partials.iter().sum()
}

/// Maps `0..len` and collects results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}
