//! Seeded Bernoulli sampling and stratified train/test/validation splits.
//!
//! Every keep/assign decision is `uniform(seed, stream, row_id)` compared with a
//! fraction, so outputs are pure functions of the table and the plan. Sizes are
//! binomial rather than exact.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::features::LabeledPoint;
use crate::ingest::ComparisonVector;
use crate::kv::KvDoc;
use crate::prf::{uniform, Stream};
use crate::table::PartitionedTable;

pub const DEFAULT_SPLIT: [f64; 3] = [0.7, 0.2, 0.1];
pub const DEFAULT_NEG_FRACTION: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 3;
pub const DEFAULT_HOLDOUT: f64 = 0.2;

/// Rows that carry a binary class.
pub trait Labeled {
    fn class(&self) -> Option<bool>;
}

impl Labeled for ComparisonVector {
    fn class(&self) -> Option<bool> {
        self.is_match
    }
}

impl<T> Labeled for LabeledPoint<T> {
    fn class(&self) -> Option<bool> {
        Some(self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
    Validation,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Validation];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Validation => "validation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    /// Train/test/validation fractions for positives.
    pub pos_split: [f64; 3],
    /// Train/test/validation fractions for the down-sampled negatives.
    pub neg_split: [f64; 3],
    /// Bernoulli keep rate applied to negatives before splitting.
    pub neg_fraction: f64,
    pub seed: u64,
    pub holdout_fraction: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            pos_split: DEFAULT_SPLIT,
            neg_split: DEFAULT_SPLIT,
            neg_fraction: DEFAULT_NEG_FRACTION,
            seed: DEFAULT_SEED,
            holdout_fraction: DEFAULT_HOLDOUT,
        }
    }
}

fn check_split(name: &str, s: &[f64; 3]) -> Result<()> {
    if s.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument(format!("{name} fractions {s:?} outside [0, 1]")));
    }
    let sum: f64 = s.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("{name} fractions {s:?} sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
    }
    Ok(())
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        check_split("positive split", &self.pos_split)?;
        check_split("negative split", &self.neg_split)?;
        if !(self.neg_fraction > 0.0 && self.neg_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "negative fraction {} outside (0, 1]",
                self.neg_fraction
            )));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "holdout fraction {} outside (0, 1)",
                self.holdout_fraction
            )));
        }
        Ok(())
    }

    fn fractions(&self, class: bool) -> &[f64; 3] {
        if class {
            &self.pos_split
        } else {
            &self.neg_split
        }
    }
}

/// Bernoulli sample: keeps each row iff `uniform(seed, row_id) < fraction`.
pub fn sample_fraction<R>(t: &PartitionedTable<R>, fraction: f64, seed: u64) -> Result<PartitionedTable<R>>
where
    R: Clone + Send + Sync + 'static,
{
    check_fraction(fraction)?;
    t.filter(|row| uniform(seed, Stream::FractionSample, row.id) < fraction)
}

/// Assigns a uniform draw to a split by cumulative thresholds.
fn assign(u: f64, fractions: &[f64; 3]) -> Split {
    let first = fractions[0];
    let second = if fractions[2] == 0.0 { 1.0 } else { fractions[0] + fractions[1] };
    if u < first {
        Split::Train
    } else if u < second {
        Split::Test
    } else {
        Split::Validation
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitCounts {
    counts: BTreeMap<(Split, bool), usize>,
}

impl SplitCounts {
    pub fn get(&self, split: Split, class: bool) -> usize {
        self.counts.get(&(split, class)).copied().unwrap_or(0)
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.get(split, true) + self.get(split, false)
    }

    pub fn class_total(&self, class: bool) -> usize {
        Split::ALL.iter().map(|&s| self.get(s, class)).sum()
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        for s in Split::ALL {
            doc.push(format!("{s}.positive"), self.get(s, true))
                .push(format!("{s}.negative"), self.get(s, false));
        }
        doc
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult<R> {
    pub train: PartitionedTable<R>,
    pub test: PartitionedTable<R>,
    pub validation: PartitionedTable<R>,
    pub counts: SplitCounts,
    /// Rows of each class before sampling.
    pub class_counts: BTreeMap<bool, usize>,
    pub warnings: Vec<String>,
}

impl<R> SplitResult<R> {
    pub fn get(&self, split: Split) -> &PartitionedTable<R> {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
            Split::Validation => &self.validation,
        }
    }

    pub fn manifest(&self, plan: &SamplingPlan) -> KvDoc {
        let mut doc = KvDoc::new();
        let fmt3 = |s: &[f64; 3]| format!("{},{},{}", s[0], s[1], s[2]);
        doc.push("seed", plan.seed)
            .push("pos_split", fmt3(&plan.pos_split))
            .push("neg_split", fmt3(&plan.neg_split))
            .push("neg_fraction", plan.neg_fraction)
            .push("input.positive", self.class_counts.get(&true).copied().unwrap_or(0))
            .push("input.negative", self.class_counts.get(&false).copied().unwrap_or(0))
            .push("sampled.negative", self.counts.class_total(false));
        for (k, v) in self.counts.to_kv().iter() {
            doc.push(k, v);
        }
        for (i, w) in self.warnings.iter().enumerate() {
            doc.push(format!("warning.{i}"), w);
        }
        doc
    }
}

/// Per-class split. Positives are split directly; negatives are first
/// down-sampled by `plan.neg_fraction`, then split. Rows without a class are
/// dropped.
pub fn stratified_split<R>(t: &PartitionedTable<R>, plan: &SamplingPlan) -> Result<SplitResult<R>>
where
    R: Labeled + Clone + Send + Sync + 'static,
{
    plan.validate()?;
    let seed = plan.seed;
    let decide = |row: &crate::table::Row<R>| -> Option<Split> {
        let class = row.value.class()?;
        if !class && uniform(seed, Stream::FractionSample, row.id) >= plan.neg_fraction {
            return None;
        }
        Some(assign(uniform(seed, Stream::StratifiedSplit, row.id), plan.fractions(class)))
    };
    let class_counts = t.count_by(|r| r.class())?;
    let class_counts: BTreeMap<bool, usize> = class_counts
        .into_iter()
        .filter_map(|(k, v)| k.map(|k| (k, v)))
        .collect();
    let mut warnings = Vec::new();
    for (class, name) in [(true, "positive"), (false, "negative")] {
        if !class_counts.contains_key(&class) {
            warnings.push(format!("no {name} rows in input; {name} splits are empty"));
        }
    }
    let train = t.filter(|r| decide(r) == Some(Split::Train))?;
    let test = t.filter(|r| decide(r) == Some(Split::Test))?;
    let validation = t.filter(|r| decide(r) == Some(Split::Validation))?;
    let mut counts = SplitCounts::default();
    for (split, table) in [(Split::Train, &train), (Split::Test, &test), (Split::Validation, &validation)] {
        for (class, n) in table.count_by(|r| r.class())? {
            if let Some(c) = class {
                counts.counts.insert((split, c), n);
            }
        }
    }
    Ok(SplitResult {
        train,
        test,
        validation,
        counts,
        class_counts,
        warnings,
    })
}

/// Plain two-way split: a row goes to test iff `uniform(seed, row_id) < test_fraction`.
pub fn holdout_split<R>(
    t: &PartitionedTable<R>,
    test_fraction: f64,
    seed: u64,
) -> Result<(PartitionedTable<R>, PartitionedTable<R>)>
where
    R: Clone + Send + Sync + 'static,
{
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let is_test = |row: &crate::table::Row<R>| uniform(seed, Stream::Holdout, row.id) < test_fraction;
    Ok((t.filter(|r| !is_test(r))?, t.filter(is_test)?))
}
