//! Order-preserving map over an index range, parallel when `std` is on.

use alloc::vec::Vec;

#[cfg(feature = "std")]
pub(crate) fn map_indexed<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map_indexed<R, F>(len: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..len).map(f).collect()
}

/// Runs `f` over `0..len`, returning the first error in index order.
pub(crate) fn try_map_indexed<R, F>(len: usize, f: F) -> crate::Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> crate::Result<R> + Sync + Send,
{
    map_indexed(len, f).into_iter().collect()
}
