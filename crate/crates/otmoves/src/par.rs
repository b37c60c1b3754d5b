//! Replicate execution: data-parallel with rayon under the `parallel`
//! feature, plain sequential otherwise. Each replicate is an independent
//! closure of its index, so the two variants produce identical results.

/// Maps `f` over `0..count`, in parallel when the `parallel` feature is
/// enabled.
#[cfg(feature = "parallel")]
pub fn replicate_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn replicate_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    replicate_map_sequential(count, f)
}

/// Always-sequential variant, kept available for benchmarking against the
/// parallel path.
pub fn replicate_map_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
