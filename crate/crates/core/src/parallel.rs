//! Data-parallel helpers with a sequential fallback when the `parallel`
//! feature is disabled.
//!
//! Both entry points preserve index order, so results (including float
//! accumulation order at the call sites) are identical with and without the
//! feature and for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every `stride`-sized row of `buf`, indexed by row number.
pub fn for_each_chunk_mut<F>(buf: &mut [f64], stride: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        buf.par_chunks_mut(stride).enumerate().for_each(|(i, chunk)| f(i, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        buf.chunks_mut(stride).enumerate().for_each(|(i, chunk)| f(i, chunk));
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_range_ordered<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_writes_are_indexed() {
        let mut buf = vec![0.0; 12];
        for_each_chunk_mut(&mut buf, 3, |i, chunk| {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = (i * 10 + j) as f64;
            }
        });
        assert_eq!(buf[3], 10.0);
        assert_eq!(buf[11], 32.0);
    }

    #[test]
    fn ordered_map_preserves_order() {
        let out = map_range_ordered(5, |i| i * i);
        assert_eq!(out, vec![0, 1, 4, 9, 16]);
    }
}
