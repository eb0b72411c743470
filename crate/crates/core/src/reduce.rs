//! Order-fixed parallel reductions.
//!
//! Floating-point sums are computed over fixed blocks of [`BLOCK`] consecutive
//! logical rows, in parallel, and the block partials are then added left to
//! right. The grouping depends only on the row count, never on partitioning
//! or the number of worker threads, so results are bit-identical across runs.

use std::ops::Range;

use rayon::prelude::*;

pub const BLOCK: usize = 4096;

/// Sums `block(range)` over fixed blocks covering `0..len`, merging with `add`.
pub fn block_reduce<A, F, M>(len: usize, zero: A, block: F, add: M) -> A
where
    A: Send + Clone,
    F: Fn(Range<usize>) -> A + Sync + Send,
    M: Fn(A, A) -> A,
{
    let n_blocks = len.div_ceil(BLOCK);
    let partials: Vec<A> = (0..n_blocks)
        .into_par_iter()
        .map(|b| block(b * BLOCK..((b + 1) * BLOCK).min(len)))
        .collect();
    partials.into_iter().fold(zero, add)
}

pub fn ordered_sum(values: &[f64]) -> f64 {
    block_reduce(values.len(), 0.0, |r| values[r].iter().sum::<f64>(), |a, b| a + b)
}
