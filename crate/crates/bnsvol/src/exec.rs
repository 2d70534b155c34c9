//! Data-parallel map helpers.
//!
//! With the `parallel` feature (default) the indexed maps run on the rayon
//! pool; without it they fall back to sequential evaluation. Results are
//! collected in index order either way, and all reductions downstream run
//! sequentially over the collected vector, so outputs are identical for any
//! thread count.

/// Maps `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let a = map_indexed(257, |i| i * i);
        let b: Vec<usize> = (0..257).map(|i| i * i).collect();
        assert_eq!(a, b);
    }
}
