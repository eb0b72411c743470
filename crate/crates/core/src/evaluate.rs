//! Confusion matrices, accuracy/precision/recall/F1, fit diagnosis and report
//! emission.
//!
//! A metric whose denominator is zero is [`Metric::Undefined`], never `0` or
//! `NaN`. Emitted CSV leaves such cells empty.

use std::fmt::{self, Write as _};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Binary confusion counts, laid out as `[[tp, fp], [fn, tn]]` when printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts with the positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.fn_, self.fp, self.tp)
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_, self.tn + o.tn)
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = [self.tp, self.fp, self.fn_, self.tn]
            .iter()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1);
        writeln!(f, "{:>w$}  {:>w$}", self.tp, self.fp)?;
        write!(f, "{:>w$}  {:>w$}", self.fn_, self.tn)
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("no predictions to evaluate".into()));
    }
    predictions
        .par_chunks(crate::reduce::BLOCK)
        .zip(labels.par_chunks(crate::reduce::BLOCK))
        .map(|(p, l)| {
            let mut m = ConfusionMatrix::default();
            for (&p, &l) in p.iter().zip(l) {
                match (p, l) {
                    (1, 1) => m.tp += 1,
                    (1, 0) => m.fp += 1,
                    (0, 1) => m.fn_ += 1,
                    (0, 0) => m.tn += 1,
                    _ => return Err(Error::InvalidInput(format!("labels must be 0/1, got ({p}, {l})"))),
                }
            }
            Ok(m)
        })
        .try_reduce(ConfusionMatrix::default, |a, b| Ok(a.add(b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric<T> {
    Value(T),
    Undefined,
}

impl<T: Scalar> Metric<T> {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Metric::Undefined
        } else {
            Metric::Value(T::from_u64(num).unwrap_or_else(T::nan) / T::from_u64(den).unwrap_or_else(T::nan))
        }
    }

    pub fn value(self) -> Option<T> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Metric::Value(_))
    }

    /// Four decimals, or an empty string when undefined.
    pub fn csv_cell(self) -> String {
        self.value().map(|v| format!("{:.4}", v.as_f64())).unwrap_or_default()
    }
}

impl<T: Scalar> fmt::Display for Metric<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Value(v) => write!(f, "{:.4}", v.as_f64()),
            Metric::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T> {
    pub model: String,
    pub split: String,
    /// Absent for reports transcribed from published tables.
    pub matrix: Option<ConfusionMatrix>,
    pub accuracy: Metric<T>,
    pub precision: Metric<T>,
    pub recall: Metric<T>,
    pub f1: Metric<T>,
}

pub fn metrics<T: Scalar>(m: &ConfusionMatrix) -> Result<MetricsReport<T>> {
    if m.total() == 0 {
        return Err(Error::InvalidInput("confusion matrix is empty".into()));
    }
    let precision = Metric::ratio(m.tp, m.tp + m.fp);
    let recall = Metric::ratio(m.tp, m.tp + m.fn_);
    // 2pr/(p+r) written over counts, which stays defined (as 0) when tp = 0
    let f1 = if precision.is_defined() && recall.is_defined() {
        Metric::ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn_)
    } else {
        Metric::Undefined
    };
    Ok(MetricsReport {
        model: String::new(),
        split: String::new(),
        matrix: Some(*m),
        accuracy: Metric::ratio(m.tp + m.tn, m.total()),
        precision,
        recall,
        f1,
    })
}

impl<T: Scalar> MetricsReport<T> {
    pub fn labeled(mut self, model: &str, split: &str) -> Self {
        self.model = model.to_string();
        self.split = split.to_string();
        self
    }

    /// A report carrying only published metric values.
    pub fn from_values(model: &str, split: &str, accuracy: T, precision: T, recall: T, f1: T) -> Self {
        Self {
            model: model.to_string(),
            split: split.to_string(),
            matrix: None,
            accuracy: Metric::Value(accuracy),
            precision: Metric::Value(precision),
            recall: Metric::Value(recall),
            f1: Metric::Value(f1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    WellFit,
    Overfit,
    Underfit,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::WellFit => "WELL_FIT",
            Verdict::Overfit => "OVERFIT",
            Verdict::Underfit => "UNDERFIT",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitThresholds {
    pub gap: f64,
    pub f1_floor: f64,
}

impl Default for FitThresholds {
    fn default() -> Self {
        Self { gap: 0.05, f1_floor: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub verdict: Verdict,
    /// train F1 minus validation F1.
    pub train_validation_gap: Option<f64>,
    /// validation F1 minus test F1.
    pub validation_test_gap: Option<f64>,
    pub reason: String,
}

/// OVERFIT when F1 drops by more than `gap` from train to validation or from
/// validation to test; UNDERFIT when every F1 is below `f1_floor`.
pub fn fit_diagnosis<T: Scalar>(
    train: &MetricsReport<T>,
    validation: &MetricsReport<T>,
    test: &MetricsReport<T>,
    thresholds: FitThresholds,
) -> Diagnosis {
    let f1s: Vec<Option<f64>> = [train, validation, test]
        .iter()
        .map(|r| r.f1.value().map(Scalar::as_f64))
        .collect();
    let (tr, va, te) = match (f1s[0], f1s[1], f1s[2]) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            let missing: Vec<&str> = [train, validation, test]
                .iter()
                .zip(["train", "validation", "test"])
                .filter(|(r, _)| !r.f1.is_defined())
                .map(|(_, n)| n)
                .collect();
            return Diagnosis {
                verdict: Verdict::Indeterminate,
                train_validation_gap: None,
                validation_test_gap: None,
                reason: format!("F1 undefined on {}", missing.join(", ")),
            };
        }
    };
    let (g1, g2) = (tr - va, va - te);
    let (verdict, reason) = if g1 > thresholds.gap {
        (Verdict::Overfit, format!("train F1 exceeds validation F1 by {g1:.4} > {}", thresholds.gap))
    } else if g2 > thresholds.gap {
        (Verdict::Overfit, format!("validation F1 exceeds test F1 by {g2:.4} > {}", thresholds.gap))
    } else if tr < thresholds.f1_floor && va < thresholds.f1_floor && te < thresholds.f1_floor {
        (Verdict::Underfit, format!("all F1 below {}", thresholds.f1_floor))
    } else {
        (Verdict::WellFit, format!("gaps {g1:.4} and {g2:.4} within {}", thresholds.gap))
    };
    Diagnosis {
        verdict,
        train_validation_gap: Some(g1),
        validation_test_gap: Some(g2),
        reason,
    }
}

pub const REPORT_HEADER: &str = "model,split,tp,fp,fn,tn,accuracy,precision,recall,f1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

pub fn reports_to_csv<T: Scalar>(reports: &[MetricsReport<T>]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let counts = r
            .matrix
            .map(|m| format!("{},{},{},{}", m.tp, m.fp, m.fn_, m.tn))
            .unwrap_or_else(|| ",,,".into());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.model,
            r.split,
            counts,
            r.accuracy.csv_cell(),
            r.precision.csv_cell(),
            r.recall.csv_cell(),
            r.f1.csv_cell()
        );
    }
    out
}

/// Aligned plain-text table of the same rows.
pub fn reports_to_table<T: Scalar>(reports: &[MetricsReport<T>]) -> String {
    let header: Vec<String> = REPORT_HEADER.split(',').map(str::to_string).collect();
    let mut rows = vec![header];
    for r in reports {
        let c = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        let m = r.matrix;
        rows.push(vec![
            r.model.clone(),
            r.split.clone(),
            c(m.map(|m| m.tp)),
            c(m.map(|m| m.fp)),
            c(m.map(|m| m.fn_)),
            c(m.map(|m| m.tn)),
            r.accuracy.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (cell, w))| if j < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

pub fn emit_report<T: Scalar>(reports: &[MetricsReport<T>], path: &Path, format: ReportFormat) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to emit".into()));
    }
    let text = match format {
        ReportFormat::Csv => reports_to_csv(reports),
        ReportFormat::Table => reports_to_table(reports),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses CSV written by [`reports_to_csv`]. Metric values come back at the
/// emitted four-decimal precision.
pub fn parse_report_csv<T: Scalar>(text: &str) -> Result<Vec<MetricsReport<T>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(Error::Schema(format!("report must start with `{REPORT_HEADER}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Schema(format!("report line {}: expected 10 fields", i + 2)));
        }
        let bad = |what: &str| Error::Schema(format!("report line {}: bad {what}", i + 2));
        let counts: Vec<Option<u64>> = f[2..6]
            .iter()
            .map(|s| if s.is_empty() { Ok(None) } else { s.parse().map(Some).map_err(|_| bad("count")) })
            .collect::<Result<_>>()?;
        let matrix = match counts.as_slice() {
            [Some(tp), Some(fp), Some(fn_), Some(tn)] => Some(ConfusionMatrix::new(*tp, *fp, *fn_, *tn)),
            [None, None, None, None] => None,
            _ => return Err(bad("confusion counts")),
        };
        let metric = |s: &str| -> Result<Metric<T>> {
            if s.is_empty() {
                Ok(Metric::Undefined)
            } else {
                s.parse::<f64>().map(|v| Metric::Value(T::from_f64_lossy(v))).map_err(|_| bad("metric"))
            }
        };
        out.push(MetricsReport {
            model: f[0].to_string(),
            split: f[1].to_string(),
            matrix,
            accuracy: metric(f[6])?,
            precision: metric(f[7])?,
            recall: metric(f[8])?,
            f1: metric(f[9])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(m: Metric<f64>) -> f64 {
        m.value().unwrap()
    }

    #[test]
    fn basic_confusion() {
        let m = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(m, ConfusionMatrix::new(2, 0, 0, 1));
        let m = confusion(&[0, 1, 0], &[1, 0, 1]).unwrap();
        assert_eq!((m.tp, m.tn), (0, 0));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion(&[1], &[1, 0]), Err(Error::Shape { .. })));
        assert!(matches!(confusion(&[], &[]), Err(Error::InvalidInput(_))));
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn published_matrices_exact_ratios() {
        // exact ratios of the published counts
        let svm = metrics::<f64>(&ConfusionMatrix::new(4114, 1109, 3, 15818)).unwrap();
        assert_eq!(v(svm.accuracy), 19932.0 / 21044.0);
        assert_eq!(v(svm.precision), 4114.0 / 5223.0);
        assert_eq!(v(svm.recall), 4114.0 / 4117.0);
        assert_eq!(v(svm.f1), 8228.0 / 9340.0);
        let lr = metrics::<f64>(&ConfusionMatrix::new(3942, 608, 175, 16319)).unwrap();
        assert_eq!(v(lr.accuracy), 20261.0 / 21044.0);
        assert_eq!(v(lr.precision), 3942.0 / 4550.0);
        assert_eq!(v(lr.recall), 3942.0 / 4117.0);
        assert_eq!(v(lr.f1), 7884.0 / 8667.0);
    }

    #[test]
    fn degenerate_denominators() {
        let r = metrics::<f64>(&ConfusionMatrix::new(0, 0, 0, 10)).unwrap();
        assert_eq!(r.accuracy, Metric::Value(1.0));
        assert_eq!(r.precision, Metric::Undefined);
        assert_eq!(r.recall, Metric::Undefined);
        assert_eq!(r.f1, Metric::Undefined);
        assert!(metrics::<f64>(&ConfusionMatrix::default()).is_err());
        let csv = reports_to_csv(&[r.labeled("m", "test")]);
        assert_eq!(csv.lines().nth(1), Some("m,test,0,0,0,10,1.0000,,,"));
    }

    #[test]
    fn f1_zero_when_no_true_positives() {
        let r = metrics::<f64>(&ConfusionMatrix::new(0, 3, 2, 5)).unwrap();
        assert_eq!(r.f1, Metric::Value(0.0));
    }

    #[test]
    fn swap_keeps_accuracy() {
        let m = ConfusionMatrix::new(7, 3, 2, 11);
        let a = metrics::<f64>(&m).unwrap();
        let b = metrics::<f64>(&m.swapped()).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(m.swapped().swapped(), m);
    }

    fn rep(f1: Option<f64>) -> MetricsReport<f64> {
        let mut r = MetricsReport::from_values("lr", "x", 0.9, 0.9, 0.9, 0.0);
        r.f1 = f1.map_or(Metric::Undefined, Metric::Value);
        r
    }

    #[test]
    fn diagnosis_cases() {
        let t = FitThresholds::default();
        let d = fit_diagnosis(&rep(Some(0.9424)), &rep(Some(0.9424)), &rep(Some(0.9096)), t);
        assert_eq!(d.verdict, Verdict::WellFit);
        assert!((d.validation_test_gap.unwrap() - 0.0328).abs() < 1e-12);
        let d = fit_diagnosis(&rep(Some(1.0)), &rep(Some(0.6)), &rep(Some(0.6)), t);
        assert_eq!(d.verdict, Verdict::Overfit);
        let d = fit_diagnosis(&rep(Some(0.3)), &rep(Some(0.3)), &rep(Some(0.3)), t);
        assert_eq!(d.verdict, Verdict::Underfit);
        let d = fit_diagnosis(&rep(Some(0.9)), &rep(None), &rep(Some(0.9)), t);
        assert_eq!(d.verdict, Verdict::Indeterminate);
        assert!(d.reason.contains("validation"));
    }

    #[test]
    fn csv_layout_and_determinism() {
        let a = metrics::<f64>(&ConfusionMatrix::new(4114, 1109, 3, 15818)).unwrap().labeled("svm", "test");
        let b = metrics::<f64>(&ConfusionMatrix::new(3942, 608, 175, 16319)).unwrap().labeled("logistic", "test");
        let csv = reports_to_csv(&[a.clone(), b.clone()]);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv, reports_to_csv(&[a, b]));
        assert!(csv.contains("svm,test,4114,1109,3,15818,0.9472,0.7877,0.9993,0.8809"));
        let table = reports_to_table(&parse_report_csv::<f64>(&csv).unwrap());
        assert_eq!(table.lines().count(), 3);
    }

    #[test]
    fn empty_report_list() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        assert!(emit_report::<f64>(&[], &p, ReportFormat::Csv).is_err());
    }
}
