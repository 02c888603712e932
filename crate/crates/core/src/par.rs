//! Ordered block reduction on top of rayon.

use rayon::prelude::*;

use crate::error::Result;

/// Samples per work block. Block boundaries, and therefore floating-point
/// summation order, never depend on the number of worker threads.
pub const BLOCK: usize = 4096;

/// Runs `work(b)` for every block index and feeds the results to `fold` in
/// increasing block order. Blocks are computed in parallel groups so memory
/// stays bounded; the first failing block (in block order) is returned.
pub fn ordered_fold<T, F, G>(nblocks: usize, work: F, mut fold: G) -> Result<()>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
    G: FnMut(usize, T) -> Result<()>,
{
    let group = (rayon::current_num_threads() * 4).max(4);
    let mut start = 0;
    while start < nblocks {
        let end = (start + group).min(nblocks);
        let parts: Vec<Result<T>> = (start..end).into_par_iter().map(&work).collect();
        for (b, p) in (start..end).zip(parts) {
            fold(b, p?)?;
        }
        start = end;
    }
    Ok(())
}

/// Number of `BLOCK`-sized blocks covering `n` items.
pub fn nblocks(n: usize) -> usize {
    n.div_ceil(BLOCK)
}

/// Item range of block `b` out of `n` items.
pub fn block_range(b: usize, n: usize) -> std::ops::Range<usize> {
    let lo = b * BLOCK;
    lo..(lo + BLOCK).min(n)
}
