//! Data-parallel helpers.
//!
//! With the `parallel` feature the loops below fan out over rayon; without it
//! they run on the calling thread. Reductions always split the index range into
//! fixed-size blocks and fold the block partials left to right, so the two
//! builds return bitwise-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block length for reductions. Changing it changes rounding.
pub const REDUCE_BLOCK: usize = 4096;

/// Below this many elements the parallel build still runs sequentially.
pub const PAR_THRESHOLD: usize = 1 << 14;

/// Sum of `f(i)` for `i in 0..n` with the fixed block summation order.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let block_sum = |b: usize| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    let blocks = n.div_ceil(REDUCE_BLOCK);
    #[cfg(feature = "parallel")]
    if n >= PAR_THRESHOLD {
        let partials: Vec<f64> = (0..blocks).into_par_iter().map(block_sum).collect();
        return partials.iter().fold(0.0, |a, &b| a + b);
    }
    (0..blocks).map(block_sum).fold(0.0, |a, b| a + b)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_by(a.len(), |i| a[i] * b[i])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Runs `f(k, chunk)` over consecutive `len`-sized chunks of `out`.
pub fn for_each_chunk_mut<F>(out: &mut [f64], len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_THRESHOLD {
        out.par_chunks_mut(len)
            .enumerate()
            .for_each(|(k, c)| f(k, c));
        return;
    }
    out.chunks_mut(len).enumerate().for_each(|(k, c)| f(k, c));
}

/// Elementwise `out[i] = f(i)`.
pub fn fill_with<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    for_each_chunk_mut(out, REDUCE_BLOCK, |k, c| {
        let base = k * REDUCE_BLOCK;
        for (o, v) in c.iter_mut().enumerate() {
            *v = f(base + o);
        }
    });
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for_each_chunk_mut(y, REDUCE_BLOCK, |k, c| {
        let base = k * REDUCE_BLOCK;
        for (o, v) in c.iter_mut().enumerate() {
            *v += a * x[base + o];
        }
    });
}

/// Maps `f` over independent jobs, preserving order.
pub fn map_jobs<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(f).collect()
    }
}
