//! End-to-end run: ingest, preprocess, sample, train both models, evaluate,
//! and write every artifact under the output directory.
//!
//! Artifacts: `effective.config`, `corpus.manifest`, `preprocess.report`,
//! `split.manifest`, `model_logistic.txt`, `model_hinge.txt`, `report.csv`,
//! `report.txt`, `diagnosis.txt`, `run.manifest`. The manifest is rewritten
//! after every stage so a failed run still leaves a partial one behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluate::{confusion, fit_diagnosis, metrics, reports_to_csv, reports_to_table, Diagnosis, MetricsReport, Verdict};
use crate::features::FeatureMatrix;
use crate::ingest::{self, ComparisonVector};
use crate::kv::KvDoc;
use crate::models::{predict, train, TrainedModel};
use crate::preprocess::preprocess;
use crate::sampling::{stratified_split, Split};
use crate::table::{with_workers, PartitionedTable};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub doc: KvDoc,
    pub out_dir: PathBuf,
    pub reports: Vec<MetricsReport<f64>>,
    pub diagnoses: Vec<(String, Diagnosis)>,
}

impl RunManifest {
    pub fn all_well_fit(&self) -> bool {
        self.diagnoses.iter().all(|(_, d)| d.verdict == Verdict::WellFit)
    }

    /// 0 when every model is well fit, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_well_fit() {
            0
        } else {
            2
        }
    }
}

struct Run {
    out: PathBuf,
    doc: KvDoc,
}

impl Run {
    fn flush(&self) -> Result<()> {
        self.doc.write(&self.out.join("run.manifest"))
    }

    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&mut KvDoc) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let mut section = KvDoc::new();
        let res = f(&mut section);
        self.doc.extend_prefixed(name, &section);
        match res {
            Ok(v) => {
                self.doc.push(format!("time.{name}_ms"), start.elapsed().as_millis());
                self.flush()?;
                Ok(v)
            }
            Err(e) => {
                self.doc
                    .set("status", "failed")
                    .push("failed_stage", name)
                    .push("error", e.to_string().replace('\n', " "));
                // best effort; the stage error is what matters
                let _ = self.flush();
                Err(Error::Stage {
                    stage: name,
                    source: Box::new(e),
                })
            }
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load(config: &PipelineConfig, out: &Path, section: &mut KvDoc) -> Result<PartitionedTable<ComparisonVector>> {
    let input = match (&config.archive, &config.input_dir) {
        (Some(archive), _) => {
            let dest = config.work_dir.clone().unwrap_or_else(|| out.join("extracted"));
            let files = ingest::extract_nested(archive, &dest)?;
            section.push("extracted_files", files.len());
            dest
        }
        (None, Some(dir)) => dir.clone(),
        (None, None) => return Err(Error::Config("neither `input-dir` nor `archive` is set".into())),
    };
    let opts = config.ingest_options()?;
    let (table, manifest) = if config.cache {
        let (t, m) = ingest::load_corpus(&input, &config.glob, &opts)?;
        (t.cache()?, m)
    } else {
        ingest::open_corpus(&input, &config.glob, &opts)?
    };
    manifest.to_kv().write(&out.join("corpus.manifest"))?;
    let labels = table.count_by(|cv| cv.is_match)?;
    section
        .push("total_rows", manifest.total_rows)
        .push("files", manifest.files.len())
        .push("header_fingerprint", &manifest.header_fingerprint)
        .push("positive", labels.get(&Some(true)).copied().unwrap_or(0))
        .push("negative", labels.get(&Some(false)).copied().unwrap_or(0))
        .push("cached", table.is_cached());
    Ok(table)
}

fn evaluate_model(model: &TrainedModel<f64>, name: &str, split: Split, m: &FeatureMatrix<f64>) -> Result<MetricsReport<f64>> {
    if m.is_empty() {
        return Err(Error::InvalidInput(format!("{split} split is empty")));
    }
    let p = predict(model, m)?;
    Ok(metrics(&confusion(&p.labels, m.labels())?)?.labeled(name, split.name()))
}

fn pipeline(config: &PipelineConfig, run: &mut Run) -> Result<(Vec<MetricsReport<f64>>, Vec<(String, Diagnosis)>)> {
    let out = run.out.clone();
    let table = run.stage("ingest", |s| load(config, &out, s))?;

    let matrix = run.stage("preprocess", |s| {
        let (matrix, report) = preprocess::<f64>(&table, &config.preprocess)?;
        report.to_kv().write(&out.join("preprocess.report"))?;
        s.push("full_count", report.full_count)
            .push("retained", report.to_kv().get("retained").unwrap_or_default());
        Ok(matrix)
    })?;
    drop(table);

    let splits = run.stage("sample", |s| {
        let points = matrix.to_table(config.partitions)?;
        let result = stratified_split(&points, &config.sampling)?;
        let manifest = result.manifest(&config.sampling);
        manifest.write(&out.join("split.manifest"))?;
        for (k, v) in result.counts.to_kv().iter() {
            s.push(k, v);
        }
        let columns = matrix.columns().to_vec();
        Split::ALL
            .iter()
            .map(|&sp| FeatureMatrix::from_table(columns.clone(), result.get(sp)))
            .collect::<Result<Vec<_>>>()
    })?;
    drop(matrix);

    let models = run.stage("train", |s| {
        let mut models = Vec::new();
        for cfg in [&config.logistic, &config.hinge] {
            let name = cfg.loss.name();
            let model = train(&splits[0], cfg)?;
            let path = out.join(format!("model_{name}.txt"));
            model.save(&path)?;
            s.push(format!("{name}.epochs_run"), model.meta.epochs_run)
                .push(format!("{name}.converged"), model.meta.converged)
                .push(format!("{name}.final_loss"), model.meta.final_loss)
                .push(format!("{name}.path"), path.display());
            models.push((name, model));
        }
        Ok(models)
    })?;

    run.stage("evaluate", |s| {
        let mut reports = Vec::new();
        let mut diagnoses = Vec::new();
        let mut diag_doc = KvDoc::new();
        for (name, model) in &models {
            let per_split = Split::ALL
                .iter()
                .zip(&splits)
                .map(|(&sp, m)| evaluate_model(model, name, sp, m))
                .collect::<Result<Vec<_>>>()?;
            let d = fit_diagnosis(&per_split[0], &per_split[2], &per_split[1], config.fit);
            diag_doc
                .push(format!("{name}.verdict"), d.verdict)
                .push(format!("{name}.reason"), &d.reason);
            s.push(format!("{name}.verdict"), d.verdict);
            diagnoses.push((name.to_string(), d));
            reports.extend(per_split);
        }
        write(&out.join("report.csv"), &reports_to_csv(&reports))?;
        write(&out.join("report.txt"), &reports_to_table(&reports))?;
        diag_doc.write(&out.join("diagnosis.txt"))?;
        s.push("report_csv", out.join("report.csv").display())
            .push("report_txt", out.join("report.txt").display());
        Ok((reports, diagnoses))
    })
}

/// Runs every stage. Outputs depend only on `config` (not on partition or
/// worker counts, nor on caching).
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate()?;
    let out = config.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    config.to_kv().write(&out.join("effective.config"))?;

    let mut run = Run {
        out: out.clone(),
        doc: KvDoc::new(),
    };
    run.doc.push("tool_version", TOOL_VERSION).push("status", "running");
    run.doc.extend_prefixed("config", &config.to_kv());
    run.flush()?;

    let (reports, diagnoses) = with_workers(config.workers, || pipeline(config, &mut run))??;
    run.doc.set("status", "ok");
    run.flush()?;
    Ok(RunManifest {
        doc: run.doc,
        out_dir: out,
        reports,
        diagnoses,
    })
}
