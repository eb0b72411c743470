//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.
//!
//! Criteria 2 and 3 need the published comparison-pattern corpus. Point
//! `PAIRLINK_CORPUS` at the directory holding `block_*.csv` (or at the zip
//! archive); without it both criteria report FAIL.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use pairlink::config::PipelineConfig;
use pairlink::evaluate::{fit_diagnosis, metrics, reports_to_csv, ConfusionMatrix, FitThresholds, Metric, MetricsReport, Verdict};
use pairlink::features::FeatureMatrix;
use pairlink::ingest::{self, IngestOptions};
use pairlink::models::{loss_and_gradient, LossKind, TrainedModel};
use pairlink::pairgen::{generate_candidate_pairs, PhoneticAlgorithm};
use pairlink::pipeline::run_pipeline;
use pairlink::sampling::{sample_fraction, stratified_split, Labeled, SamplingPlan, Split};
use pairlink::table::PartitionedTable;
use pairlink::RowId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn corpus_path() -> Option<PathBuf> {
    std::env::var_os("PAIRLINK_CORPUS").map(PathBuf::from).filter(|p| p.exists())
}

fn corpus_config(out: &std::path::Path) -> Option<PipelineConfig> {
    let p = corpus_path()?;
    let mut cfg = PipelineConfig::default();
    if p.is_dir() {
        cfg.input_dir = Some(p);
    } else {
        cfg.archive = Some(p);
    }
    cfg.out_dir = out.to_path_buf();
    Some(cfg)
}

const NO_CORPUS: &str = "published corpus not available (set PAIRLINK_CORPUS)";

// ---------------------------------------------------------------------------

fn ac1_metric_reproduction() -> Outcome {
    let cases = [
        ("svm", ConfusionMatrix::new(4114, 1109, 3, 15818), [0.9471, 0.7876, 0.9992, 0.8809]),
        ("regression", ConfusionMatrix::new(3942, 608, 175, 16319), [0.9627, 0.8663, 0.9574, 0.9096]),
    ];
    let mut misses = Vec::new();
    let mut checked = 0;
    for (name, m, published) in cases {
        let r: MetricsReport<f64> = metrics(&m).unwrap();
        let got = [r.accuracy, r.precision, r.recall, r.f1].map(|v| v.value().unwrap());
        for ((label, g), p) in ["accuracy", "precision", "recall", "f1"].iter().zip(got).zip(published) {
            checked += 1;
            if (g - p).abs() > 5e-5 {
                misses.push(format!("{name}.{label}={g:.6} vs {p} (|d|={:.1e})", (g - p).abs()));
            }
        }
    }
    if misses.is_empty() {
        outcome(true, format!("{checked}/{checked} within 5e-5"))
    } else {
        outcome(
            false,
            format!("{}/{checked} outside 5e-5: {}", misses.len(), misses.join("; ")),
        )
    }
}

/// Not a criterion: shows how the published four-decimal values relate to the
/// exact ratios.
fn ac1_truncation_note() -> String {
    let cases = [
        (ConfusionMatrix::new(4114, 1109, 3, 15818), [0.9471, 0.7876, 0.9992, 0.8809]),
        (ConfusionMatrix::new(3942, 608, 175, 16319), [0.9627, 0.8663, 0.9574, 0.9096]),
    ];
    let mut rounded = 0;
    let mut truncated = 0;
    for (m, published) in cases {
        let r: MetricsReport<f64> = metrics(&m).unwrap();
        for (v, p) in [r.accuracy, r.precision, r.recall, r.f1].iter().zip(published) {
            let v = v.value().unwrap();
            rounded += usize::from(format!("{v:.4}") == format!("{p:.4}"));
            truncated += usize::from(format!("{:.4}", (v * 1e4).floor() / 1e4) == format!("{p:.4}"));
        }
    }
    format!("published values match 4-decimal rounding {rounded}/8, truncation {truncated}/8")
}

fn ac2_corpus_integrity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let Some(cfg) = corpus_config(dir.path()) else {
        return outcome(false, NO_CORPUS);
    };
    let start = Instant::now();
    let input = match (&cfg.archive, &cfg.input_dir) {
        (Some(a), _) => match ingest::extract_nested(a, &dir.path().join("extracted")) {
            Ok(_) => dir.path().join("extracted"),
            Err(e) => return outcome(false, format!("extraction failed: {e}")),
        },
        (None, Some(d)) => d.clone(),
        _ => unreachable!(),
    };
    let (table, manifest) = match ingest::load_corpus(&input, &cfg.glob, &IngestOptions::default()) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("load failed: {e}")),
    };
    let counts = table.count_by(|cv| cv.is_match).unwrap();
    let t = counts.get(&Some(true)).copied().unwrap_or(0);
    let f = counts.get(&Some(false)).copied().unwrap_or(0);
    let pass = manifest.total_rows == 5_749_132 && t == 20_931 && f == 5_728_201;
    outcome(
        pass,
        format!(
            "{} rows, true {t}, false {f} from {} files in {:.1?}",
            manifest.total_rows,
            manifest.files.len(),
            start.elapsed()
        ),
    )
}

fn ac3_end_to_end_bands() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let Some(cfg) = corpus_config(dir.path()) else {
        return outcome(false, NO_CORPUS);
    };
    let start = Instant::now();
    let run = match run_pipeline(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let find = |model: &str| {
        run.reports
            .iter()
            .find(|r| r.model == model && r.split == "test")
            .cloned()
            .expect("test report")
    };
    let v = |m: Metric<f64>| m.value().unwrap_or(f64::NAN);
    let lr = find("logistic");
    let svm = find("hinge");
    let checks = [
        ("logistic F1 >= 0.88", v(lr.f1) >= 0.88),
        ("logistic precision >= 0.82", v(lr.precision) >= 0.82),
        ("svm recall >= 0.97", v(svm.recall) >= 0.97),
        ("svm F1 >= 0.80", v(svm.f1) >= 0.80),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        format!(
            "logistic F1 {:.4} P {:.4}; svm R {:.4} F1 {:.4}; {:.1?}{}",
            v(lr.f1),
            v(lr.precision),
            v(svm.recall),
            v(svm.f1),
            start.elapsed(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

#[derive(Clone)]
struct Class(bool);

impl Labeled for Class {
    fn class(&self) -> Option<bool> {
        Some(self.0)
    }
}

fn within_3_sigma(count: usize, n: usize, p: f64) -> (bool, f64) {
    let mean = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let z = (count as f64 - mean) / sigma;
    (z.abs() <= 3.0, z)
}

fn ac4_sampling_statistics() -> Outcome {
    const NEG: usize = 5_728_201;
    const POS: usize = 20_931;
    let plan = SamplingPlan::default();
    let negatives = PartitionedTable::from_values(vec![Class(false); NEG], 8).unwrap();
    let kept = sample_fraction(&negatives, plan.neg_fraction, plan.seed).unwrap().len().unwrap();
    let band = 572_820usize.abs_diff(kept) <= 2_155;
    let published_in_band = 572_820usize.abs_diff(571_709) <= 2_155;
    drop(negatives);

    // negatives keep the row ids they had above, so the down-sample must agree
    let mut values = vec![Class(false); NEG];
    values.extend(std::iter::repeat(Class(true)).take(POS));
    let table = PartitionedTable::from_values(values, 8).unwrap();
    let split = stratified_split(&table, &plan).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let sampled_neg = split.counts.class_total(false);
    for (class, n, fracs) in [(true, POS, plan.pos_split), (false, sampled_neg, plan.neg_split)] {
        for (sp, p) in Split::ALL.iter().zip(fracs) {
            let (inside, z) = within_3_sigma(split.counts.get(*sp, class), n, p);
            ok &= inside;
            worst = worst.max(z.abs());
        }
    }
    let same_draw = sampled_neg == kept;
    outcome(
        band && published_in_band && ok && same_draw,
        format!(
            "kept {kept} of {NEG} (band 572820±2155; published 571709 inside: {published_in_band}); split |z| max {worst:.2}; stratified negatives {sampled_neg}"
        ),
    )
}

fn ac5_partition_invariance() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for n in [1usize, 4, 8] {
        let mut cfg = PipelineConfig::default();
        cfg.input_dir = Some(common::fixture_dir());
        cfg.out_dir = root.path().join(format!("p{n}"));
        cfg.partitions = n;
        cfg.workers = n;
        if let Err(e) = run_pipeline(&cfg) {
            return outcome(false, format!("run with {n} partitions failed: {e}"));
        }
        let read = |f: &str| std::fs::read(cfg.out_dir.join(f)).unwrap();
        outputs.push((
            n,
            [
                read("report.csv"),
                read("report.txt"),
                read("split.manifest"),
                read("model_logistic.txt"),
                read("model_hinge.txt"),
            ],
        ));
    }
    let differing: Vec<usize> = outputs[1..]
        .iter()
        .filter(|(_, o)| *o != outputs[0].1)
        .map(|(n, _)| *n)
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "reports, split manifests and models byte-identical for 1/4/8 partitions and workers".to_string()
        } else {
            format!("outputs differ from the 1-partition run at {differing:?}")
        },
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        0.0
    } else {
        diff / norm
    }
}

fn random_instance(rng: &mut ChaCha8Rng, loss: LossKind) -> (TrainedModel<f64>, FeatureMatrix<f64>) {
    loop {
        let d = rng.gen_range(2..=9);
        let n = rng.gen_range(10..=60);
        let columns = (0..d).map(|j| format!("c{j}")).collect();
        let rows = (0..n).map(|i| {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            (RowId(i as u64), x, rng.gen_bool(0.4))
        });
        let m = FeatureMatrix::from_rows(columns, rows.collect::<Vec<_>>()).unwrap();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = TrainedModel::with_params(loss, w, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.1));
        if loss == LossKind::Hinge {
            let near_kink = (0..m.len()).any(|i| {
                let y = if m.labels()[i] == 1 { 1.0 } else { -1.0 };
                (1.0 - y * model.decision_value(m.row(i))).abs() < 1e-3
            });
            if near_kink {
                continue;
            }
        }
        return (model, m);
    }
}

fn ac6_gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AD1);
    let h = 1e-6;
    let mut worst = [0.0f64; 2];
    for (k, loss) in [LossKind::Logistic, LossKind::Hinge].into_iter().enumerate() {
        for _ in 0..50 {
            let (model, m) = random_instance(&mut rng, loss);
            let (_, g) = loss_and_gradient(&model, &m).unwrap();
            let mut analytic = g.weights.clone();
            analytic.push(g.bias);
            let eval = |mm: &TrainedModel<f64>| loss_and_gradient(mm, &m).unwrap().0;
            let mut numeric = Vec::new();
            for j in 0..=model.width() {
                let mut plus = model.clone();
                let mut minus = model.clone();
                if j < model.width() {
                    plus.weights[j] += h;
                    minus.weights[j] -= h;
                } else {
                    plus.bias += h;
                    minus.bias -= h;
                }
                numeric.push((eval(&plus) - eval(&minus)) / (2.0 * h));
            }
            worst[k] = worst[k].max(rel_err(&analytic, &numeric));
        }
    }
    outcome(
        worst.iter().all(|e| *e < 1e-5),
        format!("max relative error logistic {:.2e}, hinge {:.2e} over 50 instances each", worst[0], worst[1]),
    )
}

fn ac7_blocking_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB10C);
    let mut total = 0;
    for set in 0..100 {
        let n = rng.gen_range(0..=200);
        let records = common::random_records(&mut rng, n);
        let got: BTreeSet<(u64, u64)> = generate_candidate_pairs(&records, PhoneticAlgorithm::Soundex)
            .unwrap()
            .into_iter()
            .collect();
        let want = common::brute_force_pairs(&records, PhoneticAlgorithm::Soundex);
        if got != want {
            return outcome(
                false,
                format!(
                    "set {set} (n={n}): {} pairs vs {} by brute force",
                    got.len(),
                    want.len()
                ),
            );
        }
        total += want.len();
    }
    outcome(true, format!("100 sets equal to all-pairs evaluation ({total} pairs total)"))
}

fn ac8_degenerate_metrics() -> Outcome {
    let cases = [
        (ConfusionMatrix::new(0, 0, 0, 10), [true, false, false, false]),
        (ConfusionMatrix::new(0, 4, 0, 6), [true, true, false, false]),
        (ConfusionMatrix::new(0, 0, 5, 5), [true, false, true, false]),
    ];
    let mut problems = Vec::new();
    let mut reports = Vec::new();
    for (m, defined) in cases {
        let r: MetricsReport<f64> = metrics(&m).unwrap();
        for (metric, want) in [r.accuracy, r.precision, r.recall, r.f1].iter().zip(defined) {
            let ok = match metric {
                Metric::Value(v) => want && v.is_finite(),
                Metric::Undefined => !want,
            };
            if !ok {
                problems.push(format!("{m}: {metric}"));
            }
        }
        reports.push(r.labeled("m", "test"));
    }
    let csv = reports_to_csv(&reports);
    for (line, (_, defined)) in csv.lines().skip(1).zip(cases) {
        let cells: Vec<&str> = line.split(',').collect();
        for (cell, want) in cells[6..].iter().zip(defined) {
            if cell.is_empty() == want || cell.to_ascii_lowercase().contains("nan") {
                problems.push(format!("csv `{line}`"));
                break;
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "zero denominators give Metric::Undefined and empty CSV cells".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn ac9_fit_diagnosis() -> Outcome {
    let validation = MetricsReport::from_values("regression", "validation", 0.9671, 0.9195, 0.9665, 0.9424);
    let test = MetricsReport::from_values("regression", "test", 0.9627, 0.8663, 0.9574, 0.9096);
    // no training-split figures are published; validation stands in for train
    let d = fit_diagnosis(&validation, &validation, &test, FitThresholds::default());
    outcome(
        d.verdict == Verdict::WellFit,
        format!("{} ({})", d.verdict, d.reason),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("AC1 metric reproduction (±5e-5)", ac1_metric_reproduction),
        ("AC2 corpus integrity", ac2_corpus_integrity),
        ("AC3 end-to-end bands", ac3_end_to_end_bands),
        ("AC4 sampling statistics", ac4_sampling_statistics),
        ("AC5 partition/worker invariance", ac5_partition_invariance),
        ("AC6 gradient checks", ac6_gradient_checks),
        ("AC7 blocking oracle equivalence", ac7_blocking_oracle),
        ("AC8 degenerate-metric markers", ac8_degenerate_metrics),
        ("AC9 fit diagnosis", ac9_fit_diagnosis),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if name.starts_with("AC1") {
            println!("     note: {}", ac1_truncation_note());
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
