//! Seeded per-row pseudo-random function used by every randomized operation.
//!
//! `uniform(seed, stream, row)` is a pure function of its arguments, so keep/assign
//! decisions never depend on partitioning or thread scheduling. The construction
//! is SplitMix64 applied twice over the seed, a stream tag, and the row id.

use crate::table::RowId;

/// Stream tags keep independent decisions over the same (seed, row) uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    FractionSample = 0x5A4D_504C_0000_0001,
    StratifiedSplit = 0x5A4D_504C_0000_0002,
    Holdout = 0x5A4D_504C_0000_0003,
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn hash64(seed: u64, stream: Stream, row: RowId) -> u64 {
    let key = splitmix64(seed ^ stream as u64);
    splitmix64(key ^ splitmix64(row.0))
}

/// Maps the top 53 bits of the hash to `[0, 1)`.
#[inline]
pub fn uniform(seed: u64, stream: Stream, row: RowId) -> f64 {
    (hash64(seed, stream, row) >> 11) as f64 / (1u64 << 53) as f64
}
