//! Confusion matrices, per-class precision/recall/F1 and comparison CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::TrainHistory;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("nothing to write")]
    EmptyInput,
    #[error("report for '{method}' has no class '{class}'")]
    ClassMismatch { method: String, class: String },
    #[error("cannot parse report: {0}")]
    Parse(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `counts[t][p]` = examples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[usize], predicted: &[usize], classes: Vec<String>) -> Result<Self, MetricsError> {
        if truth.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        let k = classes.len();
        let mut counts = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            for label in [t, p] {
                if label >= k {
                    return Err(MetricsError::LabelOutOfRange { label, classes: k });
                }
            }
            counts[t][p] += 1;
        }
        Ok(Self { classes, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_positives(&self, k: usize) -> u64 {
        self.counts[k][k]
    }

    /// Predicted as `k` but belonging elsewhere.
    pub fn false_positives(&self, k: usize) -> u64 {
        (0..self.num_classes())
            .filter(|&t| t != k)
            .map(|t| self.counts[t][k])
            .sum()
    }

    pub fn false_negatives(&self, k: usize) -> u64 {
        (0..self.num_classes())
            .filter(|&p| p != k)
            .map(|p| self.counts[k][p])
            .sum()
    }

    /// Number of examples whose true class is `k`.
    pub fn support(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }
}

/// Confusion matrix over `k` classes named `"0"`, `"1"`, ...
pub fn confusion(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix, MetricsError> {
    ConfusionMatrix::from_labels(truth, predicted, (0..k).map(|i| i.to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// Feature family the classifier was trained on ("hog", "resnet50", ...).
    pub feature_source: String,
    /// SHA-256 of the training configuration, hex encoded.
    pub config_hash: String,
    /// Free-form key/value notes (training configuration, model path, ...).
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Derives per-class and macro-averaged metrics. Any ratio with a zero
/// denominator is reported as 0.
pub fn report(cm: &ConfusionMatrix) -> Result<EvaluationReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let per_class: Vec<ClassMetrics> = (0..cm.num_classes())
        .map(|k| {
            let tp = cm.true_positives(k);
            let precision = ratio(tp, tp + cm.false_positives(k));
            let recall = ratio(tp, tp + cm.false_negatives(k));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                class: cm.classes[k].clone(),
                precision,
                recall,
                f1,
                support: cm.support(k),
            }
        })
        .collect();
    Ok(EvaluationReport {
        metadata: ReportMetadata::default(),
        macro_precision: mean(per_class.iter().map(|c| c.precision)),
        macro_recall: mean(per_class.iter().map(|c| c.recall)),
        macro_f1: mean(per_class.iter().map(|c| c.f1)),
        accuracy: ratio(cm.trace(), total),
        per_class,
        confusion: cm.clone(),
    })
}

impl EvaluationReport {
    pub fn with_metadata(mut self, metadata: ReportMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn method(&self) -> &str {
        &self.metadata.feature_source
    }

    /// Support-weighted mean of a per-class metric.
    pub fn weighted(&self, metric: impl Fn(&ClassMetrics) -> f64) -> f64 {
        let total: u64 = self.per_class.iter().map(|c| c.support).sum();
        self.per_class.iter().map(|c| metric(c) * c.support as f64).sum::<f64>() / total as f64
    }

    /// Plain-text table: one row per class, then the macro average and accuracy.
    pub fn to_text(&self) -> String {
        let width = self.per_class.iter().map(|c| c.class.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        if !self.metadata.feature_source.is_empty() {
            let _ = writeln!(out, "features: {}", self.metadata.feature_source);
        }
        let _ = writeln!(
            out,
            "{:<width$} {:>9} {:>9} {:>9} {:>8}",
            "", "precision", "recall", "f1-score", "support"
        );
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$} {:>9.2} {:>9.2} {:>9.2} {:>8}",
                c.class, c.precision, c.recall, c.f1, c.support
            );
        }
        let support: u64 = self.per_class.iter().map(|c| c.support).sum();
        let _ = writeln!(
            out,
            "{:<width$} {:>9.2} {:>9.2} {:>9.2} {:>8}",
            "average", self.macro_precision, self.macro_recall, self.macro_f1, support
        );
        let _ = writeln!(out, "accuracy {:.7}", self.accuracy);
        out
    }

    /// CSV with header `class,precision,recall,f1,support` and a final
    /// `macro_avg` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for c in &self.per_class {
            let _ = writeln!(out, "{},{},{},{},{}", c.class, c.precision, c.recall, c.f1, c.support);
        }
        let support: u64 = self.per_class.iter().map(|c| c.support).sum();
        let _ = writeln!(
            out,
            "macro_avg,{},{},{},{}",
            self.macro_precision, self.macro_recall, self.macro_f1, support
        );
        out
    }

    /// The whole report as one line of JSON.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Parses a JSON-lines file of reports, skipping blank lines.
pub fn parse_reports(text: &str) -> Result<Vec<EvaluationReport>, MetricsError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| MetricsError::Parse(e.to_string())))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), MetricsError> {
    std::fs::write(path, text).map_err(|source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the per-epoch accuracy/loss curves as CSV.
pub fn emit_curves(history: &TrainHistory, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    if history.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    write_text(path.as_ref(), &history.to_csv())
}

/// `class,method,recall` rows grouped by class (classes in the first
/// report's order, methods in input order).
pub fn recall_comparison_csv(reports: &[EvaluationReport]) -> Result<String, MetricsError> {
    let first = reports.first().ok_or(MetricsError::EmptyInput)?;
    let mut out = String::from("class,method,recall\n");
    for class in first.per_class.iter().map(|c| &c.class) {
        for r in reports {
            let m = r
                .per_class
                .iter()
                .find(|c| &c.class == class)
                .ok_or_else(|| MetricsError::ClassMismatch {
                    method: r.method().to_string(),
                    class: class.clone(),
                })?;
            let _ = writeln!(out, "{},{},{}", class, r.method(), m.recall);
        }
    }
    Ok(out)
}

pub fn emit_recall_comparison(reports: &[EvaluationReport], path: impl AsRef<Path>) -> Result<(), MetricsError> {
    write_text(path.as_ref(), &recall_comparison_csv(reports)?)
}

/// `method,accuracy` rows in input order.
pub fn accuracy_comparison_csv(reports: &[EvaluationReport]) -> Result<String, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut out = String::from("method,accuracy\n");
    for r in reports {
        let _ = writeln!(out, "{},{}", r.method(), r.accuracy);
    }
    Ok(out)
}

pub fn emit_accuracy_comparison(reports: &[EvaluationReport], path: impl AsRef<Path>) -> Result<(), MetricsError> {
    write_text(path.as_ref(), &accuracy_comparison_csv(reports)?)
}
