use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pairlink::config::PipelineConfig;
use pairlink::evaluate::{confusion, emit_report, fit_diagnosis, metrics, FitThresholds, MetricsReport, ReportFormat, Verdict};
use pairlink::features::FeatureMatrix;
use pairlink::ingest::{self, IngestOptions, Schema, DEFAULT_GLOB, DEFAULT_MISSING_TOKEN};
use pairlink::kv::KvDoc;
use pairlink::models::{predict, train, LossKind, Schedule, TrainConfig, TrainedModel};
use pairlink::pairgen::{comparison_patterns, patterns_to_csv, read_raw_records, NameSimilarity, PairgenOptions, PhoneticAlgorithm};
use pairlink::pipeline::run_pipeline;
use pairlink::preprocess::{preprocess, ImputePolicy, PreprocessConfig};
use pairlink::sampling::{holdout_split, stratified_split, SamplingPlan, Split};
use pairlink::table::{default_parallelism, with_workers};
use pairlink::{Error, Result};

#[derive(Parser)]
#[command(name = "pairlink", version, about = "Record linkage over comparison patterns")]
struct Cli {
    /// Partitions per table (default: logical CPUs).
    #[arg(long, global = true)]
    partitions: Option<usize>,
    /// Worker threads (default: logical CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate block files (or an archive) into one table.
    Ingest(IngestArgs),
    /// Drop sparse columns and rows, impute, write a feature matrix.
    Preprocess(PreprocessArgs),
    /// Split a feature matrix into train/test/validation.
    Sample(SampleArgs),
    /// Block raw person records and write comparison patterns.
    Pairgen(PairgenArgs),
    /// Fit a linear model on a feature matrix.
    Train(TrainArgs),
    /// Score models and diagnose fit.
    Evaluate(EvaluateArgs),
    /// Run every stage from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Zip or gzip archive to extract first (nested zips are unpacked).
    #[arg(long, conflicts_with = "dir")]
    archive: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_GLOB)]
    glob: String,
    #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
    missing_token: String,
    /// Header renames, e.g. `cmp_fname_c1=fn1,is_match=label`.
    #[arg(long, default_value = "")]
    column_map: String,
    /// Writes corpus.csv and corpus.manifest here.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Table written by `ingest`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
    missing_token: String,
    #[arg(long)]
    col_missing_max: Option<String>,
    #[arg(long)]
    col_missing_inclusive: bool,
    #[arg(long)]
    row_min_present: Option<String>,
    #[arg(long)]
    impute: Option<ImputePolicy>,
    /// Writes features.csv and preprocess.report here.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Feature matrix written by `preprocess`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    pos_split: Option<String>,
    #[arg(long)]
    neg_split: Option<String>,
    #[arg(long)]
    neg_fraction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Plain train/test split with this test fraction instead of the stratified one.
    #[arg(long)]
    holdout: Option<String>,
    /// Writes <split>.csv files and split.manifest here.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PairgenArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "soundex")]
    phonetic: PhoneticAlgorithm,
    #[arg(long, default_value = "jaro-winkler")]
    name_sim: NameSimilarity,
    #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
    missing_token: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "logistic")]
    loss: LossKind,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    schedule: Option<Schedule>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file; repeat for several.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    /// Only report this split (all splits are still used for diagnosis).
    #[arg(long)]
    split: Option<Split>,
    /// Directory holding train.csv, test.csv and validation.csv.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// A single feature matrix evaluated as `--split`.
    #[arg(long, conflicts_with = "data_dir", requires = "split")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    gap_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    f1_floor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an aligned table next to the CSV.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file; flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any config key, e.g. `--set logistic.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn ingest_cmd(a: IngestArgs, partitions: usize) -> Result<i32> {
    let opts = IngestOptions {
        schema: Schema::default().with_mapping(&a.column_map)?,
        missing_token: a.missing_token.clone(),
        partitions,
    };
    out_dir(&a.out)?;
    let dir = match (&a.archive, &a.dir) {
        (Some(archive), _) => {
            let dest = a.out.join("extracted");
            ingest::extract_nested(archive, &dest)?;
            dest
        }
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(Error::InvalidArgument("one of --dir or --archive is required".into())),
    };
    let (table, manifest) = ingest::load_corpus(&dir, &a.glob, &opts)?;
    ingest::write_table(&a.out.join("corpus.csv"), &table, &a.missing_token)?;
    manifest.to_kv().write(&a.out.join("corpus.manifest"))?;
    eprintln!("{} rows from {} files", manifest.total_rows, manifest.files.len());
    Ok(0)
}

fn preprocess_cmd(a: PreprocessArgs, partitions: usize) -> Result<i32> {
    let mut c = PipelineConfig::default();
    for (k, v) in [("col-missing-max", &a.col_missing_max), ("row-min-present", &a.row_min_present)] {
        if let Some(v) = v {
            c.apply(k, v)?;
        }
    }
    let cfg = PreprocessConfig {
        col_missing_inclusive: a.col_missing_inclusive,
        impute: a.impute.unwrap_or(c.preprocess.impute),
        ..c.preprocess
    };
    let opts = IngestOptions {
        missing_token: a.missing_token,
        partitions,
        ..IngestOptions::default()
    };
    let table = ingest::read_table(&a.input, &opts)?;
    let (matrix, report) = preprocess::<f64>(&table, &cfg)?;
    out_dir(&a.out)?;
    matrix.write_csv(&a.out.join("features.csv"))?;
    report.to_kv().write(&a.out.join("preprocess.report"))?;
    eprintln!("{} of {} rows kept, {} columns", matrix.len(), report.rows_in, matrix.width());
    Ok(0)
}

fn sample_cmd(a: SampleArgs, partitions: usize) -> Result<i32> {
    let mut c = PipelineConfig::default();
    for (k, v) in [
        ("pos-split", &a.pos_split),
        ("neg-split", &a.neg_split),
        ("neg-fraction", &a.neg_fraction),
        ("seed", &a.seed),
        ("holdout-fraction", &a.holdout),
    ] {
        if let Some(v) = v {
            c.apply(k, v)?;
        }
    }
    let plan: SamplingPlan = c.sampling;
    let matrix = FeatureMatrix::<f64>::read_csv(&a.input)?;
    let points = matrix.to_table(partitions)?;
    let columns = matrix.columns().to_vec();
    out_dir(&a.out)?;
    if a.holdout.is_some() {
        let (tr, te) = holdout_split(&points, plan.holdout_fraction, plan.seed)?;
        let mut doc = KvDoc::new();
        doc.push("holdout_fraction", plan.holdout_fraction).push("seed", plan.seed);
        for (name, t) in [("train", tr), ("test", te)] {
            let m = FeatureMatrix::from_table(columns.clone(), &t)?;
            doc.push(format!("{name}.rows"), m.len())
                .push(format!("{name}.positive"), m.positives());
            m.write_csv(&a.out.join(format!("{name}.csv")))?;
        }
        doc.write(&a.out.join("split.manifest"))?;
        return Ok(0);
    }
    let result = stratified_split(&points, &plan)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    for sp in Split::ALL {
        FeatureMatrix::from_table(columns.clone(), result.get(sp))?.write_csv(&a.out.join(format!("{sp}.csv")))?;
    }
    result.manifest(&plan).write(&a.out.join("split.manifest"))?;
    Ok(0)
}

fn pairgen_cmd(a: PairgenArgs) -> Result<i32> {
    let records = read_raw_records(&a.input)?;
    let opts = PairgenOptions {
        phonetic: a.phonetic,
        name_similarity: a.name_sim,
    };
    let patterns = comparison_patterns(&records, opts)?;
    write(&a.out, &patterns_to_csv(&patterns, &a.missing_token))?;
    eprintln!("{} candidate pairs from {} records", patterns.len(), records.len());
    Ok(0)
}

fn train_cmd(a: TrainArgs) -> Result<i32> {
    let mut cfg = TrainConfig::<f64>::new(a.loss);
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.l2 {
        cfg.l2 = v;
    }
    if let Some(v) = a.tol {
        cfg.tolerance = v;
    }
    if let Some(v) = a.schedule {
        cfg.schedule = v;
    }
    let matrix = FeatureMatrix::<f64>::read_csv(&a.input)?;
    let model = train(&matrix, &cfg)?;
    model.save(&a.out)?;
    eprintln!(
        "{} epochs, final loss {}, converged {}",
        model.meta.epochs_run, model.meta.final_loss, model.meta.converged
    );
    Ok(0)
}

fn model_name(path: &Path, model: &TrainedModel<f64>) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().trim_start_matches("model_").to_string())
        .unwrap_or_else(|| model.loss.name().to_string())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<i32> {
    let fit = FitThresholds {
        gap: a.gap_threshold,
        f1_floor: a.f1_floor,
    };
    let data: Vec<(Split, FeatureMatrix<f64>)> = match (&a.input, &a.data_dir) {
        (Some(p), _) => vec![(a.split.expect("clap enforces --split"), FeatureMatrix::read_csv(p)?)],
        (None, dir) => {
            let dir = dir.clone().or_else(|| a.model[0].parent().map(Path::to_path_buf)).unwrap_or_default();
            Split::ALL
                .iter()
                .filter(|sp| dir.join(format!("{sp}.csv")).is_file())
                .map(|&sp| Ok((sp, FeatureMatrix::read_csv(&dir.join(format!("{sp}.csv")))?)))
                .collect::<Result<_>>()?
        }
    };
    if data.is_empty() {
        return Err(Error::NotFound("no split data (train.csv, test.csv, validation.csv)".into()));
    }
    let mut reports = Vec::new();
    let mut code = 0;
    for path in &a.model {
        let model = TrainedModel::<f64>::load(path)?;
        let name = model_name(path, &model);
        let mut per_split: Vec<(Split, MetricsReport<f64>)> = Vec::new();
        for (sp, m) in &data {
            let p = predict(&model, m)?;
            per_split.push((*sp, metrics(&confusion(&p.labels, m.labels())?)?.labeled(&name, sp.name())));
        }
        let find = |s: Split| per_split.iter().find(|(sp, _)| *sp == s).map(|(_, r)| r);
        if let (Some(tr), Some(va), Some(te)) = (find(Split::Train), find(Split::Validation), find(Split::Test)) {
            let d = fit_diagnosis(tr, va, te, fit);
            eprintln!("{name}: {} ({})", d.verdict, d.reason);
            if d.verdict != Verdict::WellFit {
                code = 2;
            }
        }
        reports.extend(
            per_split
                .into_iter()
                .filter(|(sp, _)| a.split.map_or(true, |s| s == *sp))
                .map(|(_, r)| r),
        );
    }
    match &a.out {
        Some(out) => {
            emit_report(&reports, out, ReportFormat::Csv)?;
            if a.table {
                emit_report(&reports, &out.with_extension("txt"), ReportFormat::Table)?;
            }
        }
        None => print!("{}", pairlink::evaluate::reports_to_table(&reports)),
    }
    Ok(code)
}

fn run_cmd(a: RunArgs, partitions: Option<usize>, workers: Option<usize>) -> Result<i32> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &a.config {
        for (k, v) in KvDoc::read(path)?.iter() {
            cfg.apply(k, v)?;
        }
    }
    let mut flags: Vec<(String, String)> = Vec::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k.to_string(), v));
        }
    };
    flag("input-dir", a.input_dir.map(|p| p.display().to_string()));
    flag("archive", a.archive.map(|p| p.display().to_string()));
    flag("seed", a.seed.map(|s| s.to_string()));
    flag("out-dir", a.out.map(|p| p.display().to_string()));
    flag("partitions", partitions.map(|n| n.to_string()));
    flag("workers", workers.map(|n| n.to_string()));
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in &flags {
        cfg.apply(k, v)?;
    }
    let manifest = run_pipeline(&cfg)?;
    for (name, d) in &manifest.diagnoses {
        eprintln!("{name}: {} ({})", d.verdict, d.reason);
    }
    print!("{}", pairlink::evaluate::reports_to_table(&manifest.reports));
    Ok(manifest.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32> {
    let partitions = cli.partitions.unwrap_or_else(default_parallelism).max(1);
    let workers = cli.workers.unwrap_or_else(default_parallelism).max(1);
    match cli.command {
        Command::Run(a) => run_cmd(a, cli.partitions, cli.workers),
        other => with_workers(workers, move || match other {
            Command::Ingest(a) => ingest_cmd(a, partitions),
            Command::Preprocess(a) => preprocess_cmd(a, partitions),
            Command::Sample(a) => sample_cmd(a, partitions),
            Command::Pairgen(a) => pairgen_cmd(a),
            Command::Train(a) => train_cmd(a),
            Command::Evaluate(a) => evaluate_cmd(a),
            Command::Run(_) => unreachable!(),
        })?,
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                if !msg.contains(&s.to_string()) {
                    msg.push_str(&format!("\n  caused by: {s}"));
                }
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
