//! Missing-value thresholds, imputation and vectorization.
//!
//! Columns are retained when their missing fraction is strictly below the
//! threshold (default 0.20). Rows are kept when at least `min_present`
//! retained columns carry a value (default 3). Remaining gaps are filled by an
//! [`ImputePolicy`]; the default fills `0.0`, the maximum-disagreement score.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ingest::{ComparisonVector, Feature};
use crate::kv::KvDoc;
use crate::reduce::block_reduce;
use crate::scalar::Scalar;
use crate::table::PartitionedTable;

pub const DEFAULT_COL_MISSING_MAX: f64 = 0.20;
pub const DEFAULT_ROW_MIN_PRESENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnProfile {
    pub feature: Feature,
    pub present: u64,
    pub missing: u64,
}

impl ColumnProfile {
    pub fn total(&self) -> u64 {
        self.present + self.missing
    }

    /// Exact missing fraction.
    pub fn missing_fraction(&self) -> Ratio<i128> {
        Ratio::new(i128::from(self.missing), i128::from(self.total().max(1)))
    }

    pub fn missing_fraction_f64(&self) -> f64 {
        self.missing as f64 / self.total().max(1) as f64
    }
}

/// One profile per score column, in canonical column order.
pub fn profile_columns(t: &PartitionedTable<ComparisonVector>) -> Result<Vec<ColumnProfile>> {
    let (total, present) = t.aggregate(
        (0u64, [0u64; 9]),
        |(n, mut acc), row| {
            for f in Feature::ALL {
                acc[f.index()] += u64::from(row.value.score(f).is_some());
            }
            (n + 1, acc)
        },
        |(na, mut a), (nb, b)| {
            for i in 0..9 {
                a[i] += b[i];
            }
            (na + nb, a)
        },
    )?;
    if total == 0 {
        return Err(Error::InvalidInput("cannot profile an empty table".into()));
    }
    Ok(Feature::ALL
        .iter()
        .map(|&f| ColumnProfile {
            feature: f,
            present: present[f.index()],
            missing: total - present[f.index()],
        })
        .collect())
}

fn exact_threshold(threshold: f64) -> Result<Ratio<i128>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "missing-fraction threshold {threshold} outside (0, 1]"
        )));
    }
    Ratio::<i128>::approximate_float(threshold)
        .ok_or_else(|| Error::InvalidArgument(format!("threshold {threshold} not representable")))
}

/// Columns whose missing fraction is `< threshold` (or `<=` when `inclusive`).
pub fn select_columns(
    profiles: &[ColumnProfile],
    threshold: f64,
    inclusive: bool,
) -> Result<Vec<Feature>> {
    let limit = exact_threshold(threshold)?;
    let retained: Vec<Feature> = profiles
        .iter()
        .filter(|p| {
            let frac = p.missing_fraction();
            if inclusive {
                frac <= limit
            } else {
                frac < limit
            }
        })
        .map(|p| p.feature)
        .collect();
    if retained.is_empty() {
        return Err(Error::Config(format!(
            "no column has a missing fraction below {threshold}"
        )));
    }
    Ok(retained)
}

/// Keeps rows with at least `min_present` values among `retained`.
pub fn filter_rows(
    t: &PartitionedTable<ComparisonVector>,
    retained: &[Feature],
    min_present: usize,
) -> Result<PartitionedTable<ComparisonVector>> {
    t.filter(|row| row.value.present_count(retained) >= min_present)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImputePolicy {
    #[default]
    Zero,
    Mean,
}

impl FromStr for ImputePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(ImputePolicy::Zero),
            "mean" => Ok(ImputePolicy::Mean),
            other => Err(Error::Config(format!(
                "unknown impute policy `{other}` (expected zero|mean)"
            ))),
        }
    }
}

impl fmt::Display for ImputePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImputePolicy::Zero => "zero",
            ImputePolicy::Mean => "mean",
        })
    }
}

/// Per-column fill values learned from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    pub columns: Vec<Feature>,
    pub fill: Vec<f64>,
}

impl Imputer {
    pub fn fit(
        t: &PartitionedTable<ComparisonVector>,
        columns: &[Feature],
        policy: ImputePolicy,
    ) -> Result<Self> {
        let fill = match policy {
            ImputePolicy::Zero => vec![0.0; columns.len()],
            ImputePolicy::Mean => {
                let rows = t.values()?;
                columns
                    .iter()
                    .map(|&f| {
                        let (sum, n) = block_reduce(
                            rows.len(),
                            (0.0f64, 0u64),
                            |r| {
                                rows[r].iter().filter_map(|cv| cv.score(f)).fold(
                                    (0.0, 0u64),
                                    |(s, n), v| (s + v, n + 1),
                                )
                            },
                            |(sa, na), (sb, nb)| (sa + sb, na + nb),
                        );
                        if n == 0 {
                            0.0
                        } else {
                            sum / n as f64
                        }
                    })
                    .collect()
            }
        };
        Ok(Self {
            columns: columns.to_vec(),
            fill,
        })
    }

    pub fn transform<T: Scalar>(&self, t: &PartitionedTable<ComparisonVector>) -> Result<FeatureMatrix<T>> {
        let names = self.columns.iter().map(|f| f.name().to_string()).collect();
        let vectors = t.try_map(|cv| {
            let label = cv
                .is_match
                .ok_or_else(|| Error::InvalidInput("pair has no match label".into()))?;
            let features: Vec<T> = self
                .columns
                .iter()
                .zip(&self.fill)
                .map(|(&f, &fill)| T::from_f64_lossy(cv.score(f).unwrap_or(fill)))
                .collect();
            Ok((features, label))
        })?;
        FeatureMatrix::from_rows(
            names,
            vectors
                .collect()?
                .into_iter()
                .map(|r| (r.id, r.value.0, r.value.1)),
        )
    }
}

pub fn impute_and_vectorize<T: Scalar>(
    t: &PartitionedTable<ComparisonVector>,
    retained: &[Feature],
    policy: ImputePolicy,
) -> Result<FeatureMatrix<T>> {
    Imputer::fit(t, retained, policy)?.transform(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub col_missing_max: f64,
    /// Retain columns whose fraction equals the threshold.
    pub col_missing_inclusive: bool,
    pub row_min_present: usize,
    pub impute: ImputePolicy,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            col_missing_max: DEFAULT_COL_MISSING_MAX,
            col_missing_inclusive: false,
            row_min_present: DEFAULT_ROW_MIN_PRESENT,
            impute: ImputePolicy::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub config: PreprocessConfig,
    pub rows_in: usize,
    pub profiles: Vec<ColumnProfile>,
    pub retained: Vec<Feature>,
    pub full_count: usize,
    pub fill: Vec<f64>,
}

impl PreprocessReport {
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.push("col_missing_max", self.config.col_missing_max)
            .push("col_missing_inclusive", self.config.col_missing_inclusive)
            .push("row_min_present", self.config.row_min_present)
            .push("impute", self.config.impute)
            .push("rows_in", self.rows_in);
        for p in &self.profiles {
            doc.push(format!("missing.{}", p.feature), format!("{:.4}", p.missing_fraction_f64()));
            doc.push(format!("missing_count.{}", p.feature), p.missing);
        }
        let names: Vec<&str> = self.retained.iter().map(|f| f.name()).collect();
        doc.push("retained", names.join(","));
        for (f, v) in self.retained.iter().zip(&self.fill) {
            doc.push(format!("fill.{f}"), v);
        }
        doc.push("full_count", self.full_count);
        doc
    }
}

/// Profiles, selects columns, filters rows and vectorizes.
pub fn preprocess<T: Scalar>(
    t: &PartitionedTable<ComparisonVector>,
    config: &PreprocessConfig,
) -> Result<(FeatureMatrix<T>, PreprocessReport)> {
    let rows_in = t.len()?;
    let profiles = profile_columns(t)?;
    let retained = select_columns(&profiles, config.col_missing_max, config.col_missing_inclusive)?;
    let filtered = filter_rows(t, &retained, config.row_min_present)?;
    let imputer = Imputer::fit(&filtered, &retained, config.impute)?;
    let matrix = imputer.transform(&filtered)?;
    let report = PreprocessReport {
        config: config.clone(),
        rows_in,
        profiles,
        full_count: matrix.len(),
        retained,
        fill: imputer.fill,
    };
    Ok((matrix, report))
}
