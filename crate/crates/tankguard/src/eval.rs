//! Model evaluation: confusion matrix, accuracy/precision/recall/F1,
//! per-intensity recall breakdown, and the model comparison table.
//!
//! The positive class is anomalous (label 1). Any metric whose
//! denominator is zero is reported as 0.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::dataset::{Dataset, Intensity, Label, ScenarioTag};
use crate::forest::{self, Forest};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and truth lengths differ ({predictions} vs {truth})")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("label {0} is not binary")]
    BadLabel(u8),
    #[error("cannot compute metrics over zero samples")]
    EmptyMatrix,
}

/// Binary confusion counts with anomalous as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Plain-text block with actual classes as rows and predicted
    /// classes as columns.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("                 predicted\n");
        out.push_str("                 normal  anomalous\n");
        out.push_str(&format!("actual normal    {:>6}  {:>9}\n", self.tn, self.fp));
        out.push_str(&format!("actual anomalous {:>6}  {:>9}\n", self.fn_, self.tp));
        out
    }
}

/// The four evaluation metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Counts prediction/truth agreement; labels must be 0 or 1.
pub fn confusion(predictions: &[u8], truth: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let mut matrix = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        if p > 1 {
            return Err(EvalError::BadLabel(p));
        }
        if t > 1 {
            return Err(EvalError::BadLabel(t));
        }
        match (t, p) {
            (1, 1) => matrix.tp += 1,
            (0, 0) => matrix.tn += 1,
            (0, 1) => matrix.fp += 1,
            (1, 0) => matrix.fn_ += 1,
            _ => unreachable!(),
        }
    }
    Ok(matrix)
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}

/// Accuracy, precision, recall, and F1 from a confusion matrix; a zero
/// denominator yields 0 for that metric.
pub fn metrics(matrix: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    if matrix.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let accuracy = ratio(matrix.tp + matrix.tn, matrix.total());
    let precision = ratio(matrix.tp, matrix.tp + matrix.fp);
    let recall = ratio(matrix.tp, matrix.tp + matrix.fn_);
    let f1 = f1_score(precision, recall);
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
    })
}

/// Evaluation of one model over the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    pub metrics: Metrics,
    /// Recall among each attack intensity's positive samples, present
    /// when the test set carries attack provenance.
    pub per_intensity_recall: Vec<(Intensity, f64)>,
}

impl EvalReport {
    /// One-row CSV in the comparison-table shape.
    pub fn write_csv<W: Write>(&self, name: &str, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "model,accuracy,precision,recall,f1")?;
        writeln!(out, "{}", csv_row(name, &self.metrics))
    }

    /// Confusion block, metric lines, and the per-intensity breakdown.
    pub fn render(&self, name: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("model: {name}\n\n"));
        out.push_str(&self.matrix.render());
        out.push_str(&format!(
            "\naccuracy  {:.1}%\nprecision {:.3}\nrecall    {:.3}\nf1        {:.3}\n",
            self.metrics.accuracy * 100.0,
            self.metrics.precision,
            self.metrics.recall,
            self.metrics.f1,
        ));
        if !self.per_intensity_recall.is_empty() {
            out.push_str("\nrecall by attack intensity:\n");
            for (intensity, recall) in &self.per_intensity_recall {
                out.push_str(&format!("  {:>5}%  {:.3}\n", intensity.percent_label(), recall));
            }
        }
        out
    }
}

fn csv_row(name: &str, m: &Metrics) -> String {
    format!(
        "{},{:.3},{:.3},{:.3},{:.3}",
        name, m.accuracy, m.precision, m.recall, m.f1
    )
}

/// Predicts every test sample and assembles matrix, metrics, and the
/// per-intensity recall breakdown from provenance tags.
pub fn evaluate(forest: &Forest, test: &Dataset) -> Result<EvalReport, EvalError> {
    let predictions: Vec<u8> = test
        .records()
        .iter()
        .map(|r| forest::predict(forest, &r.features()))
        .collect();
    let truth = test.labels();
    let matrix = confusion(&predictions, &truth)?;
    let metrics = metrics(&matrix)?;

    let mut per_intensity: BTreeMap<Intensity, (usize, usize)> = BTreeMap::new();
    for ((record, provenance), prediction) in test.iter().zip(&predictions) {
        if record.label != Label::Anomalous {
            continue;
        }
        if let ScenarioTag::Attack(intensity) = provenance.scenario {
            let (hits, total) = per_intensity.entry(intensity).or_insert((0, 0));
            *total += 1;
            if *prediction == 1 {
                *hits += 1;
            }
        }
    }
    let per_intensity_recall = per_intensity
        .into_iter()
        .map(|(intensity, (hits, total))| (intensity, ratio(hits, total)))
        .collect();

    Ok(EvalReport {
        matrix,
        metrics,
        per_intensity_recall,
    })
}

/// Side-by-side metrics for named models, with the best-F1 model
/// called out. Equal F1 scores keep the first model in name order.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// (name, metrics) rows in name order.
    pub rows: Vec<(String, Metrics)>,
    pub best: String,
    pub f1_tie: bool,
}

pub fn compare(reports: &BTreeMap<String, EvalReport>) -> Option<Comparison> {
    let rows: Vec<(String, Metrics)> = reports
        .iter()
        .map(|(name, report)| (name.clone(), report.metrics))
        .collect();
    let (best, best_f1) = rows
        .iter()
        .max_by(|a, b| a.1.f1.total_cmp(&b.1.f1).then(b.0.cmp(&a.0)))
        .map(|(name, m)| (name.clone(), m.f1))?;
    let f1_tie = rows.iter().filter(|(_, m)| m.f1 == best_f1).count() > 1;
    Some(Comparison { rows, best, f1_tie })
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "model,accuracy,precision,recall,f1")?;
        for (name, m) in &self.rows {
            writeln!(out, "{}", csv_row(name, m))?;
        }
        Ok(())
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>9} {:>10} {:>7} {:>9}",
            "Model", "Accuracy", "Precision", "Recall", "F1-Score"
        )?;
        for (name, m) in &self.rows {
            writeln!(
                f,
                "{:<12} {:>8.1}% {:>10.3} {:>7.3} {:>9.3}",
                name,
                m.accuracy * 100.0,
                m.precision,
                m.recall,
                m.f1
            )?;
        }
        write!(f, "best by F1: {}", self.best)?;
        if self.f1_tie {
            write!(f, " (tie broken by name order)")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Provenance, SampleRecord};
    use crate::forest::{Hyperparams, TreeNode};
    use proptest::prelude::*;

    #[test]
    fn confusion_all_correct_has_no_errors() {
        let m = confusion(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(m, ConfusionMatrix { tp: 2, tn: 2, fp: 0, fn_: 0 });
    }

    #[test]
    fn confusion_constant_negative_on_balanced_set() {
        let truth: Vec<u8> = [vec![1u8; 500], vec![0u8; 500]].concat();
        let predictions = vec![0u8; 1000];
        let m = confusion(&predictions, &truth).unwrap();
        assert_eq!(m, ConfusionMatrix { tp: 0, fn_: 500, tn: 500, fp: 0 });
        assert_eq!(metrics(&m).unwrap().accuracy, 0.5);
    }

    #[test]
    fn confusion_length_mismatch() {
        assert_eq!(
            confusion(&[0, 1], &[0]),
            Err(EvalError::LengthMismatch { predictions: 2, truth: 1 })
        );
    }

    #[test]
    fn high_intensity_model_back_solved_matrix() {
        // 500 positives where only 248 are caught, zero false alarms
        let matrix = ConfusionMatrix { tp: 248, fn_: 252, fp: 0, tn: 500 };
        let m = metrics(&matrix).unwrap();
        assert!((m.accuracy - 0.748).abs() < 1e-3);
        assert!((m.precision - 1.0).abs() < 1e-12);
        assert!((m.recall - 0.496).abs() < 1e-3);
        assert!((m.f1 - 0.663).abs() < 1e-3);
    }

    #[test]
    fn f1_from_reference_precision_recall_pairs() {
        let check = |precision: f64, recall: f64, expected: f64| {
            let f1 = f1_score(precision, recall);
            assert!((f1 - expected).abs() < 1e-3, "f1({precision},{recall})={f1}");
        };
        check(0.709, 0.832, 0.766);
        check(0.894, 0.712, 0.792);
        check(1.0, 0.496, 0.663);
    }

    #[test]
    fn zero_denominators_yield_zero() {
        let m = metrics(&ConfusionMatrix { tp: 0, fp: 0, tn: 3, fn_: 2 }).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(matches!(
            metrics(&ConfusionMatrix::default()),
            Err(EvalError::EmptyMatrix)
        ));
    }

    fn constant_forest(label: u8) -> Forest {
        Forest {
            trees: vec![TreeNode::Leaf { label, counts: [1, 1] }],
            hyperparams: Hyperparams::default(),
            seed: 0,
        }
    }

    fn tagged_test_set() -> Dataset {
        let mut d = Dataset::new();
        let record = |label: u8| SampleRecord {
            level: 0.5,
            inflow: 0.0,
            outflow: 0.0,
            pump: false,
            valve: false,
            label: Label::from_u8(label).unwrap(),
        };
        for i in 0..10 {
            d.push(
                record(0),
                Provenance { scenario: ScenarioTag::Normal, index: i },
            );
        }
        for (j, eps) in [0.01, 0.2].iter().enumerate() {
            for i in 0..5 {
                d.push(
                    record(1),
                    Provenance {
                        scenario: ScenarioTag::Attack(Intensity::from_fraction(*eps).unwrap()),
                        index: (j * 5 + i) as u32,
                    },
                );
            }
        }
        d
    }

    #[test]
    fn perfect_and_constant_classifiers() {
        let test = tagged_test_set();
        // the always-anomalous forest catches every positive
        let report = evaluate(&constant_forest(1), &test).unwrap();
        assert_eq!(report.metrics.recall, 1.0);
        assert!(report.per_intensity_recall.iter().all(|(_, r)| *r == 1.0));
        assert_eq!(report.per_intensity_recall.len(), 2);

        let constant_negative = evaluate(&constant_forest(0), &test).unwrap();
        assert_eq!(constant_negative.metrics.accuracy, 0.5);
        assert!(constant_negative.per_intensity_recall.iter().all(|(_, r)| *r == 0.0));
    }

    #[test]
    fn breakdown_empty_without_attack_provenance() {
        let mut d = Dataset::new();
        d.push(
            SampleRecord {
                level: 0.5,
                inflow: 0.0,
                outflow: 0.0,
                pump: false,
                valve: false,
                label: Label::Anomalous,
            },
            Provenance { scenario: ScenarioTag::Normal, index: 0 },
        );
        let report = evaluate(&constant_forest(1), &d).unwrap();
        assert!(report.per_intensity_recall.is_empty());
    }

    #[test]
    fn metric_matrix_consistency() {
        let matrix = ConfusionMatrix { tp: 123, tn: 401, fp: 77, fn_: 399 };
        let m = metrics(&matrix).unwrap();
        let total = matrix.total() as f64;
        assert!((m.accuracy - (123.0 + 401.0) / total).abs() < 1e-12);
        assert!((m.precision - 123.0 / 200.0).abs() < 1e-12);
        assert!((m.recall - 123.0 / 522.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
    }

    fn report_with_f1(f1_target: f64) -> EvalReport {
        // recall chosen so that f1(precision=1, recall) = f1_target
        let recall = f1_target / (2.0 - f1_target);
        EvalReport {
            matrix: ConfusionMatrix { tp: 1, tn: 1, fp: 0, fn_: 0 },
            metrics: Metrics {
                accuracy: 0.5,
                precision: 1.0,
                recall,
                f1: f1_target,
            },
            per_intensity_recall: Vec::new(),
        }
    }

    #[test]
    fn compare_picks_max_f1() {
        let mut reports = BTreeMap::new();
        reports.insert("model 1%".to_string(), report_with_f1(0.766));
        reports.insert("model 10%".to_string(), report_with_f1(0.792));
        reports.insert("model 20%".to_string(), report_with_f1(0.663));
        let table = compare(&reports).unwrap();
        assert_eq!(table.best, "model 10%");
        assert!(!table.f1_tie);
        assert_eq!(table.rows.len(), 3);
        let text = table.to_string();
        assert!(text.contains("Model"));
        assert!(text.contains("F1-Score"));
    }

    #[test]
    fn compare_single_report_and_tie() {
        let mut reports = BTreeMap::new();
        reports.insert("only".to_string(), report_with_f1(0.5));
        let table = compare(&reports).unwrap();
        assert_eq!(table.best, "only");

        reports.insert("other".to_string(), report_with_f1(0.5));
        let table = compare(&reports).unwrap();
        assert_eq!(table.best, "only");
        assert!(table.f1_tie);
        assert!(table.to_string().contains("tie"));
        assert!(compare(&BTreeMap::new()).is_none());
    }

    #[test]
    fn csv_shapes() {
        let report = report_with_f1(0.766);
        let mut bytes = Vec::new();
        report.write_csv("model 1%", &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("model,accuracy,precision,recall,f1\n"));
        assert!(text.contains("model 1%,0.500,1.000,"));
    }

    proptest! {
        // harmonic mean bounds: min <= f1 <= max when both are nonzero,
        // and recomputing the metrics from the matrix is consistent
        #[test]
        fn f1_between_precision_and_recall(tp in 1usize..500, tn in 0usize..500, fp in 0usize..500, fn_ in 0usize..500) {
            let m = metrics(&ConfusionMatrix { tp, tn, fp, fn_ }).unwrap();
            if m.precision > 0.0 && m.recall > 0.0 {
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
            }
        }
    }
}
