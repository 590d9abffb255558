//! Per-pixel maps that run on rayon when the `parallel` feature is enabled.
//! Each output element depends only on its own index, so results are
//! identical either way.

#[cfg(feature = "parallel")]
pub(crate) fn map_indices<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n).map(f).collect()
}
