//! Execution helpers for the data-parallel inner loops.
//!
//! Every hot loop in this crate is an independent map over an index range
//! (per-cell tests, per-triangle sensitivity rows, per-current solves).
//! With the `parallel` feature the maps run on rayon; without it they fall
//! back to plain sequential iteration. Results are collected in index order
//! either way, so outputs are bitwise identical across both paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is enabled.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential reference path with the same contract as [`map_indexed`].
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}
