//! Execution strategy for bulk, embarrassingly parallel work.
//!
//! Suites and subset-enumeration checks fan out over many independent
//! instances. Both a sequential and a rayon-backed route are always compiled
//! (the benches compare them head to head); [`map_indices`] and
//! [`find_first_failure`] pick the parallel route when the `parallel` feature
//! is enabled. Results are merged by instance index, so the outcome is
//! identical either way.

/// Sequentially maps `f` over `0..n`, collecting results in index order.
pub fn seq_map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Rayon-backed variant of [`seq_map_indices`]; results are in index order.
#[cfg(feature = "parallel")]
pub fn par_map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n` with the configured strategy.
#[cfg(feature = "parallel")]
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    par_map_indices(n, f)
}

/// Maps `f` over `0..n` with the configured strategy.
#[cfg(not(feature = "parallel"))]
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    seq_map_indices(n, f)
}

/// Sequential search for the first index in `0..n` where `f` returns a
/// failure witness. Returns the witness with its index.
pub fn seq_find_first_failure<W, F>(n: usize, f: F) -> Option<(usize, W)>
where
    F: Fn(usize) -> Option<W>,
{
    (0..n).find_map(|i| f(i).map(|w| (i, w)))
}

/// Rayon-backed variant of [`seq_find_first_failure`]. `find_first`
/// guarantees the lowest failing index, so witnesses are deterministic.
#[cfg(feature = "parallel")]
pub fn par_find_first_failure<W, F>(n: usize, f: F) -> Option<(usize, W)>
where
    W: Send,
    F: Fn(usize) -> Option<W> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| f(i).map(|w| (i, w)))
        .find_first(|r| r.is_some())
        .flatten()
}

/// Finds the first failure in `0..n` with the configured strategy.
#[cfg(feature = "parallel")]
pub fn find_first_failure<W, F>(n: usize, f: F) -> Option<(usize, W)>
where
    W: Send,
    F: Fn(usize) -> Option<W> + Sync + Send,
{
    par_find_first_failure(n, f)
}

/// Finds the first failure in `0..n` with the configured strategy.
#[cfg(not(feature = "parallel"))]
pub fn find_first_failure<W, F>(n: usize, f: F) -> Option<(usize, W)>
where
    W: Send,
    F: Fn(usize) -> Option<W> + Sync + Send,
{
    seq_find_first_failure(n, f)
}
