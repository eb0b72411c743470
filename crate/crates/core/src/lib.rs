//! Data-parallel record linkage over comparison patterns.
//!
//! The crate covers the whole path from raw data to evaluated classifiers:
//!
//! * [`table`]: partitioned in-memory tables with caching and deterministic
//!   parallel map/filter/aggregate.
//! * [`ingest`]: CSV block-file parsing and aggregation into one table.
//! * [`preprocess`]: missing-value thresholds, imputation, vectorization.
//! * [`sampling`]: seeded Bernoulli sampling and stratified splits.
//! * [`pairgen`]: phonetic blocking and agreement scoring of raw person records.
//! * [`models`]: logistic regression and linear SVM by full-batch gradient descent.
//! * [`evaluate`]: confusion matrices, metrics, fit diagnosis, reports.
//! * [`pipeline`]: the end-to-end driver behind the `pairlink` binary.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the pipeline uses.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod kv;
pub mod models;
pub mod pairgen;
pub mod pipeline;
pub mod preprocess;
pub mod prf;
pub mod reduce;
pub mod sampling;
pub mod scalar;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use table::{PartitionedTable, Row, RowId};

pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type TrainedModel = models::TrainedModel<f64>;
pub type TrainedModel32 = models::TrainedModel<f32>;
pub type TrainConfig = models::TrainConfig<f64>;
pub type MetricsReport = evaluate::MetricsReport<f64>;
pub type Metric = evaluate::Metric<f64>;
