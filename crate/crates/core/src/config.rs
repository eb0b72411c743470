//! Pipeline configuration: flat `key=value` file plus per-key overrides.
//!
//! An empty file yields the defaults: column missing threshold 0.20, at least 3
//! present values per row, positive and negative split 0.7/0.2/0.1, negative
//! keep fraction 0.1, seed 3, holdout 0.2.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluate::FitThresholds;
use crate::ingest::{IngestOptions, Schema, DEFAULT_GLOB, DEFAULT_MISSING_TOKEN};
use crate::kv::KvDoc;
use crate::models::{LossKind, TrainConfig};
use crate::preprocess::PreprocessConfig;
use crate::sampling::SamplingPlan;
use crate::table::default_parallelism;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input_dir: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    /// Extraction target for `archive`; defaults to `<out_dir>/extracted`.
    pub work_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub glob: String,
    pub missing_token: String,
    pub column_map: String,
    pub preprocess: PreprocessConfig,
    pub sampling: SamplingPlan,
    pub logistic: TrainConfig<f64>,
    pub hinge: TrainConfig<f64>,
    pub fit: FitThresholds,
    pub partitions: usize,
    pub workers: usize,
    pub cache: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            archive: None,
            work_dir: None,
            out_dir: PathBuf::from("pairlink-out"),
            glob: DEFAULT_GLOB.to_string(),
            missing_token: DEFAULT_MISSING_TOKEN.to_string(),
            column_map: String::new(),
            preprocess: PreprocessConfig::default(),
            sampling: SamplingPlan::default(),
            logistic: TrainConfig::new(LossKind::Logistic),
            hinge: TrainConfig::new(LossKind::Hinge),
            fit: FitThresholds::default(),
            partitions: default_parallelism(),
            workers: default_parallelism(),
            cache: true,
        }
    }
}

fn range_err(key: &str, value: &str, range: &str) -> Error {
    Error::Config(format!("`{key}` = {value} outside {range}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true/false, got `{value}`"))),
    }
}

fn parse_split(key: &str, value: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| parse_num(key, p.trim()))
        .collect::<Result<_>>()?;
    let arr: [f64; 3] = parts
        .try_into()
        .map_err(|_| Error::Config(format!("`{key}`: expected three comma-separated fractions")))?;
    if arr.iter().any(|f| !(0.0..=1.0).contains(f)) || (arr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(range_err(key, value, "[0, 1] each, summing to 1"));
    }
    Ok(arr)
}

fn fraction(key: &str, value: &str, lo_open: bool, hi_open: bool) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    let lo_ok = if lo_open { v > 0.0 } else { v >= 0.0 };
    let hi_ok = if hi_open { v < 1.0 } else { v <= 1.0 };
    if !(lo_ok && hi_ok) {
        let range = format!(
            "{}0, 1{}",
            if lo_open { "(" } else { "[" },
            if hi_open { ")" } else { "]" }
        );
        return Err(range_err(key, value, &range));
    }
    Ok(v)
}

fn positive_count(key: &str, value: &str) -> Result<usize> {
    let v: usize = parse_num(key, value)?;
    if v == 0 {
        return Err(range_err(key, value, "[1, inf)"));
    }
    Ok(v)
}

fn apply_train(cfg: &mut TrainConfig<f64>, key: &str, field: &str, value: &str) -> Result<bool> {
    match field {
        "lr" => {
            let v: f64 = parse_num(key, value)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(range_err(key, value, "(0, inf)"));
            }
            cfg.learning_rate = v;
        }
        "epochs" => cfg.epochs = positive_count(key, value)?,
        "l2" | "tol" => {
            let v: f64 = parse_num(key, value)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(range_err(key, value, "[0, inf)"));
            }
            if field == "l2" {
                cfg.l2 = v;
            } else {
                cfg.tolerance = v;
            }
        }
        "schedule" => cfg.schedule = value.parse()?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl PipelineConfig {
    /// Sets one key. Unknown keys are errors that name the key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| Some(PathBuf::from(v)).filter(|p| !p.as_os_str().is_empty());
        match key {
            "input-dir" => self.input_dir = path(value),
            "archive" => self.archive = path(value),
            "work-dir" => self.work_dir = path(value),
            "out-dir" | "out" => self.out_dir = PathBuf::from(value),
            "glob" => self.glob = value.to_string(),
            "missing-token" => {
                if value.is_empty() || value.contains(',') {
                    return Err(Error::Config("`missing-token` must be non-empty and comma-free".into()));
                }
                self.missing_token = value.to_string();
            }
            "column-map" => {
                Schema::default().with_mapping(value)?;
                self.column_map = value.to_string();
            }
            "col-missing-max" => self.preprocess.col_missing_max = fraction(key, value, true, false)?,
            "col-missing-inclusive" => self.preprocess.col_missing_inclusive = parse_bool(key, value)?,
            "row-min-present" => self.preprocess.row_min_present = parse_num(key, value)?,
            "impute" => self.preprocess.impute = value.parse()?,
            "pos-split" => self.sampling.pos_split = parse_split(key, value)?,
            "neg-split" => self.sampling.neg_split = parse_split(key, value)?,
            "neg-fraction" => self.sampling.neg_fraction = fraction(key, value, true, false)?,
            "holdout-fraction" => self.sampling.holdout_fraction = fraction(key, value, true, true)?,
            "seed" => self.sampling.seed = parse_num(key, value)?,
            "gap-threshold" => self.fit.gap = fraction(key, value, false, false)?,
            "f1-floor" => self.fit.f1_floor = fraction(key, value, false, false)?,
            "partitions" => self.partitions = positive_count(key, value)?,
            "workers" => self.workers = positive_count(key, value)?,
            "cache" => self.cache = parse_bool(key, value)?,
            _ => {
                let handled = match key.split_once('.') {
                    Some(("logistic", field)) => apply_train(&mut self.logistic, key, field, value)?,
                    Some(("hinge", field)) => apply_train(&mut self.hinge, key, field, value)?,
                    _ => false,
                };
                if !handled {
                    return Err(Error::Config(format!("unknown configuration key `{key}`")));
                }
            }
        }
        Ok(())
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in doc.iter() {
            cfg.apply(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks paths and cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = &self.archive {
            if !a.is_file() {
                return Err(Error::Config(format!("archive {} does not exist", a.display())));
            }
        } else if let Some(d) = &self.input_dir {
            if !d.is_dir() {
                return Err(Error::Config(format!("input directory {} does not exist", d.display())));
            }
        }
        self.sampling.validate()?;
        self.logistic.validate()?;
        self.hinge.validate()?;
        Ok(())
    }

    pub fn ingest_options(&self) -> Result<IngestOptions> {
        Ok(IngestOptions {
            schema: Schema::default().with_mapping(&self.column_map)?,
            missing_token: self.missing_token.clone(),
            partitions: self.partitions,
        })
    }

    /// The effective configuration; re-validating it reproduces `self`.
    pub fn to_kv(&self) -> KvDoc {
        let mut d = KvDoc::new();
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let split = |s: &[f64; 3]| format!("{},{},{}", s[0], s[1], s[2]);
        d.push("input-dir", opt(&self.input_dir))
            .push("archive", opt(&self.archive))
            .push("work-dir", opt(&self.work_dir))
            .push("out-dir", self.out_dir.display())
            .push("glob", &self.glob)
            .push("missing-token", &self.missing_token)
            .push("column-map", &self.column_map)
            .push("col-missing-max", self.preprocess.col_missing_max)
            .push("col-missing-inclusive", self.preprocess.col_missing_inclusive)
            .push("row-min-present", self.preprocess.row_min_present)
            .push("impute", self.preprocess.impute)
            .push("pos-split", split(&self.sampling.pos_split))
            .push("neg-split", split(&self.sampling.neg_split))
            .push("neg-fraction", self.sampling.neg_fraction)
            .push("holdout-fraction", self.sampling.holdout_fraction)
            .push("seed", self.sampling.seed);
        for (name, t) in [("logistic", &self.logistic), ("hinge", &self.hinge)] {
            d.push(format!("{name}.lr"), t.learning_rate)
                .push(format!("{name}.epochs"), t.epochs)
                .push(format!("{name}.l2"), t.l2)
                .push(format!("{name}.tol"), t.tolerance)
                .push(format!("{name}.schedule"), t.schedule);
        }
        d.push("gap-threshold", self.fit.gap)
            .push("f1-floor", self.fit.f1_floor)
            .push("partitions", self.partitions)
            .push("workers", self.workers)
            .push("cache", self.cache);
        d
    }
}

/// Reads, defaults and range-checks a configuration file.
pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    if !path.is_file() {
        return Err(Error::NotFound(format!("config file {}", path.display())));
    }
    PipelineConfig::from_kv(&KvDoc::read(path)?)
}
