//! Voxel-loop execution helpers.
//!
//! All hot loops in this crate go through these functions. With the
//! `parallel` feature they fan out over the rayon pool; without it they run
//! sequentially. Reductions are chunked on fixed boundaries and the partial
//! results are combined in index order, so the result is bit-identical
//! regardless of feature flags or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed reduction chunk size. Changing this changes summation order
/// (and therefore low-order bits), so it is a constant, not a tunable.
const CHUNK: usize = 4096;

/// Fill `out[i] = f(i)` for every index.
#[cfg(feature = "parallel")]
pub(crate) fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T,
{
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

fn chunk_bounds(n: usize, c: usize) -> (usize, usize) {
    let lo = c * CHUNK;
    (lo, n.min(lo + CHUNK))
}

/// Deterministic sum of `f(i)` for `i` in `0..n`.
#[cfg(feature = "parallel")]
pub(crate) fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = chunk_bounds(n, c);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        })
        .collect();
    partials.into_iter().sum()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    let chunks = n.div_ceil(CHUNK);
    let mut total = 0.0;
    for c in 0..chunks {
        let (lo, hi) = chunk_bounds(n, c);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        total += s;
    }
    total
}

/// Deterministic maximum of `f(i)` for `i` in `0..n`; `f` must be NaN-free.
#[cfg(feature = "parallel")]
pub(crate) fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = chunk_bounds(n, c);
            let mut m = f64::NEG_INFINITY;
            for i in lo..hi {
                m = m.max(f(i));
            }
            m
        })
        .collect();
    partials.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    let mut m = f64::NEG_INFINITY;
    for i in 0..n {
        m = m.max(f(i));
    }
    m
}

/// Count of indices where `pred(i)` holds. Integer addition is exact, so no
/// chunking is needed for determinism.
#[cfg(feature = "parallel")]
pub(crate) fn count_indexed<F>(n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync,
{
    (0..n).into_par_iter().filter(|&i| pred(i)).count()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn count_indexed<F>(n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool,
{
    (0..n).filter(|&i| pred(i)).count()
}
