//! In-memory partitioned table: the execution substrate for every pipeline stage.
//!
//! A table is an ordered list of partitions of [`Row`]s. Every row carries a
//! [`RowId`] assigned once at ingestion; the logical order of a table is
//! (partition index, in-partition index). Per-partition work is spread over the
//! current rayon pool, and results are always merged in partition order, so
//! outputs depend only on the table contents and arguments.
//!
//! A table is either materialized or backed by a deferred source that is
//! re-evaluated on every pass until [`PartitionedTable::cache`] pins it in memory.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RowId(pub u64);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row<R> {
    pub id: RowId,
    pub value: R,
}

impl<R> Row<R> {
    pub fn new(id: RowId, value: R) -> Self {
        Self { id, value }
    }
}

type Partitions<R> = Vec<Vec<Row<R>>>;
type Source<R> = dyn Fn() -> Result<Vec<Row<R>>> + Send + Sync;

enum Storage<R> {
    Materialized(Arc<Partitions<R>>),
    Deferred(Arc<Source<R>>),
}

impl<R> Clone for Storage<R> {
    fn clone(&self) -> Self {
        match self {
            Storage::Materialized(p) => Storage::Materialized(Arc::clone(p)),
            Storage::Deferred(s) => Storage::Deferred(Arc::clone(s)),
        }
    }
}

pub struct PartitionedTable<R> {
    storage: Storage<R>,
    partition_count: usize,
    cached: bool,
    passes: Arc<AtomicUsize>,
}

impl<R> Clone for PartitionedTable<R> {
    fn clone(&self) -> Self {
        Self {
            storage: self.storage.clone(),
            partition_count: self.partition_count,
            cached: self.cached,
            passes: Arc::clone(&self.passes),
        }
    }
}

impl<R: fmt::Debug> fmt::Debug for PartitionedTable<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("PartitionedTable");
        s.field("partition_count", &self.partition_count)
            .field("cached", &self.cached);
        if let Storage::Materialized(p) = &self.storage {
            s.field("sizes", &p.iter().map(Vec::len).collect::<Vec<_>>());
        } else {
            s.field("storage", &"deferred");
        }
        s.finish()
    }
}

/// Sizes of a contiguous split of `len` rows into `n` parts; the first
/// `len % n` parts get one extra row.
pub fn contiguous_sizes(len: usize, n: usize) -> Vec<usize> {
    let base = len / n;
    let extra = len % n;
    (0..n).map(|i| base + usize::from(i < extra)).collect()
}

fn split_contiguous<R>(rows: Vec<Row<R>>, n: usize) -> Partitions<R> {
    let sizes = contiguous_sizes(rows.len(), n);
    let mut it = rows.into_iter();
    sizes
        .into_iter()
        .map(|s| it.by_ref().take(s).collect())
        .collect()
}

fn check_partitions(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("partition count must be at least 1".into()));
    }
    Ok(())
}

impl<R> PartitionedTable<R>
where
    R: Clone + Send + Sync + 'static,
{
    /// Contiguous split of `rows` into `n` partitions, order preserved.
    pub fn partition(rows: Vec<Row<R>>, n: usize) -> Result<Self> {
        check_partitions(n)?;
        Ok(Self::from_partitions(split_contiguous(rows, n)))
    }

    /// Assigns RowIds `0..len` in order, then partitions.
    pub fn from_values(values: Vec<R>, n: usize) -> Result<Self> {
        let rows = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| Row::new(RowId(i as u64), v))
            .collect();
        Self::partition(rows, n)
    }

    fn from_partitions(parts: Partitions<R>) -> Self {
        let partition_count = parts.len().max(1);
        Self {
            storage: Storage::Materialized(Arc::new(parts)),
            partition_count,
            cached: false,
            passes: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// A table whose rows are produced by `source` on every pass until cached.
    pub fn deferred<F>(n: usize, source: F) -> Result<Self>
    where
        F: Fn() -> Result<Vec<Row<R>>> + Send + Sync + 'static,
    {
        check_partitions(n)?;
        Ok(Self {
            storage: Storage::Deferred(Arc::new(source)),
            partition_count: n,
            cached: false,
            passes: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn partition_count(&self) -> usize {
        self.partition_count
    }

    pub fn is_cached(&self) -> bool {
        self.cached
    }

    /// Number of times the deferred source has been evaluated.
    pub fn source_passes(&self) -> usize {
        self.passes.load(Ordering::SeqCst)
    }

    fn partitions(&self) -> Result<Cow<'_, [Vec<Row<R>>]>> {
        match &self.storage {
            Storage::Materialized(p) => Ok(Cow::Borrowed(p.as_slice())),
            Storage::Deferred(source) => {
                self.passes.fetch_add(1, Ordering::SeqCst);
                let rows = source()?;
                Ok(Cow::Owned(split_contiguous(rows, self.partition_count)))
            }
        }
    }

    /// Materializes the table in memory. Idempotent; contents are unchanged.
    pub fn cache(self) -> Result<Self> {
        if self.cached {
            return Ok(self);
        }
        let storage = match &self.storage {
            Storage::Materialized(p) => Storage::Materialized(Arc::clone(p)),
            Storage::Deferred(_) => {
                let parts = self.partitions()?.into_owned();
                let mut pinned = Vec::with_capacity(parts.len());
                for (i, part) in parts.into_iter().enumerate() {
                    let mut buf: Vec<Row<R>> = Vec::new();
                    buf.try_reserve_exact(part.len()).map_err(|_| Error::Resource {
                        partition: i,
                        rows: part.len(),
                    })?;
                    buf.extend(part);
                    pinned.push(buf);
                }
                Storage::Materialized(Arc::new(pinned))
            }
        };
        Ok(Self {
            storage,
            partition_count: self.partition_count,
            cached: true,
            passes: self.passes,
        })
    }

    pub fn partition_sizes(&self) -> Result<Vec<usize>> {
        Ok(self.partitions()?.iter().map(Vec::len).collect())
    }

    pub fn len(&self) -> Result<usize> {
        Ok(self.partition_sizes()?.iter().sum())
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }

    /// All rows in logical order.
    pub fn collect(&self) -> Result<Vec<Row<R>>> {
        Ok(self.partitions()?.iter().flatten().cloned().collect())
    }

    pub fn values(&self) -> Result<Vec<R>> {
        Ok(self
            .partitions()?
            .iter()
            .flatten()
            .map(|r| r.value.clone())
            .collect())
    }

    pub fn repartition(&self, n: usize) -> Result<Self> {
        check_partitions(n)?;
        Self::partition(self.collect()?, n)
    }

    pub fn map<U, F>(&self, f: F) -> Result<PartitionedTable<U>>
    where
        U: Clone + Send + Sync + 'static,
        F: Fn(&R) -> U + Sync + Send,
    {
        self.try_map(|r| Ok(f(r)))
    }

    /// Applies `f` to every row; on failure reports the first failing row in
    /// logical order, regardless of which worker hit it first.
    pub fn try_map<U, F>(&self, f: F) -> Result<PartitionedTable<U>>
    where
        U: Clone + Send + Sync + 'static,
        F: Fn(&R) -> Result<U> + Sync + Send,
    {
        let parts = self.partitions()?;
        let out: Vec<Result<Vec<Row<U>>>> = parts
            .par_iter()
            .map(|part| {
                part.iter()
                    .map(|row| {
                        f(&row.value)
                            .map(|v| Row::new(row.id, v))
                            .map_err(|e| Error::Row {
                                row: row.id,
                                source: Box::new(e),
                            })
                    })
                    .collect()
            })
            .collect();
        let parts = out.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(PartitionedTable::from_partitions(parts))
    }

    /// Keeps rows satisfying `pred`; partition boundaries are preserved.
    pub fn filter<F>(&self, pred: F) -> Result<Self>
    where
        F: Fn(&Row<R>) -> bool + Sync + Send,
    {
        let parts = self.partitions()?;
        let out: Partitions<R> = parts
            .par_iter()
            .map(|part| part.iter().filter(|r| pred(r)).cloned().collect())
            .collect();
        Ok(Self::from_partitions(out))
    }

    /// Per-partition fold merged left to right in partition order.
    pub fn aggregate<A, S, C>(&self, zero: A, seq: S, comb: C) -> Result<A>
    where
        A: Clone + Send + Sync,
        S: Fn(A, &Row<R>) -> A + Sync + Send,
        C: Fn(A, A) -> A,
    {
        let parts = self.partitions()?;
        let partials: Vec<A> = parts
            .par_iter()
            .map(|part| part.iter().fold(zero.clone(), &seq))
            .collect();
        Ok(partials.into_iter().fold(zero, comb))
    }

    pub fn count_by<K, F>(&self, key: F) -> Result<BTreeMap<K, usize>>
    where
        K: Ord + Clone + Send + Sync,
        F: Fn(&R) -> K + Sync + Send,
    {
        self.aggregate(
            BTreeMap::new(),
            |mut acc, row| {
                *acc.entry(key(&row.value)).or_insert(0) += 1;
                acc
            },
            |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                a
            },
        )
    }

    /// Concatenates tables in argument order, repartitioning to `n`.
    pub fn union(tables: &[&Self], n: usize) -> Result<Self> {
        let mut rows = Vec::new();
        for t in tables {
            rows.extend(t.collect()?);
        }
        Self::partition(rows, n)
    }
}

/// Runs `f` on a dedicated pool with `workers` threads. Every table operation
/// inside `f` uses that pool.
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
