//! Thin indirection over rayon so the crate builds with
//! `--no-default-features` (sequential fallback).
//!
//! Reductions that feed reported numbers go through [`sum_ordered`] /
//! [`map_indexed`]: partials are collected in task order and folded
//! sequentially, so results do not depend on thread scheduling or on
//! whether the `parallel` feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many elements, element-wise loops run sequentially: the
/// dispatch overhead would dwarf the arithmetic. The cutover never
/// changes results (same per-element work, same fold order).
const PAR_MIN_LEN: usize = 8192;

/// Map `f` over `0..n`, preserving index order in the output. Tasks are
/// assumed coarse; this parallelizes even for small `n`.
#[cfg(feature = "parallel")]
pub fn map_indexed<U: Send>(n: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving index order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U>(n: usize, f: impl Fn(usize) -> U) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Sum `f(i)` for `i in 0..n` with a fixed (sequential) fold order over
/// ordered per-task partials.
pub fn sum_ordered(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    map_indexed(n, f).into_iter().sum()
}

/// Deterministic dot product: fixed-size chunks, partials folded in
/// chunk order regardless of how the chunks were computed.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len().div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(a.len());
        let mut s = 0.0;
        for i in lo..hi {
            s += a[i] * b[i];
        }
        s
    };
    if a.len() < PAR_MIN_LEN {
        return (0..chunks).map(partial).sum();
    }
    sum_ordered(chunks, partial)
}

/// Apply `f` to each element of `out` with its index, in place.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T: Send>(out: &mut [T], f: impl Fn(usize, &mut T) + Sync + Send) {
    if out.len() < PAR_MIN_LEN {
        out.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    } else {
        out.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    }
}

/// Apply `f` to each element of `out` with its index, in place.
#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T>(out: &mut [T], f: impl Fn(usize, &mut T)) {
    out.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_sequential() {
        let a: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..10_000).map(|i| (i as f64).cos()).collect();
        let seq: f64 = {
            // same chunked fold, by hand
            let mut s = 0.0;
            for c in 0..a.len().div_ceil(4096) {
                let lo = c * 4096;
                let hi = (lo + 4096).min(a.len());
                let mut p = 0.0;
                for i in lo..hi {
                    p += a[i] * b[i];
                }
                s += p;
            }
            s
        };
        assert_eq!(dot(&a, &b), seq);
    }

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }
}
