//! Accuracy, per-class and support-weighted precision/recall/F1, confusion matrix.
//!
//! Undefined per-class ratios (zero denominators) are scored as 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<usize>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn num_classes(&self) -> usize {
        self.support.len()
    }

    pub fn total(&self) -> usize {
        self.support.iter().sum()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(Error::OutOfRange {
                    index: label,
                    size: num_classes,
                });
            }
        }
        confusion[t][p] += 1;
    }

    let n = y_true.len();
    let mut correct = 0;
    let (mut precision, mut recall, mut f1, mut support) = (vec![], vec![], vec![], vec![]);
    for c in 0..num_classes {
        let tp = confusion[c][c];
        let row: usize = confusion[c].iter().sum();
        let col: usize = confusion.iter().map(|r| r[c]).sum();
        correct += tp;
        let (p, r) = (ratio(tp, col), ratio(tp, row));
        precision.push(p);
        recall.push(r);
        f1.push(f_score(p, r));
        support.push(row);
    }
    let weighted = |xs: &[f64]| -> f64 {
        xs.iter()
            .zip(&support)
            .map(|(x, &s)| x * s as f64)
            .sum::<f64>()
            / n as f64
    };
    Ok(Metrics {
        accuracy: ratio(correct, n),
        weighted_precision: weighted(&precision),
        // Σ support·(tp/support) collapses to Σ tp; computed that way so it equals accuracy bit for bit
        weighted_recall: ratio(correct, n),
        weighted_f1: weighted(&f1),
        precision,
        recall,
        f1,
        support,
        confusion,
    })
}

/// Formats a fraction as a percentage with two decimals, rounding halves away from zero.
///
/// The fraction is first rounded to 10 significant digits so that values such
/// as `0.82625`, whose binary form sits just below the half, still round up.
pub fn percent(x: f64) -> String {
    let scaled = x * 100.0;
    let cleaned: f64 = format!("{scaled:.10e}").parse().unwrap_or(scaled);
    let cents = (cleaned * 100.0).round();
    format!("{:.2}", cents / 100.0)
}

/// `key=value` aggregate lines, a per-class table, then the confusion matrix.
pub fn format_report(m: &Metrics, label_names: &[String]) -> String {
    let mut out = format_key_values(m);
    let name = |c: usize| label_names.get(c).cloned().unwrap_or_else(|| c.to_string());
    let width = (0..m.num_classes())
        .map(|c| name(c).chars().count())
        .max()
        .unwrap_or(5)
        .max(5);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
        "class", "precision", "recall", "f1", "support"
    );
    for c in 0..m.num_classes() {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            name(c),
            percent(m.precision[c]),
            percent(m.recall[c]),
            percent(m.f1[c]),
            m.support[c]
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion (rows = true, columns = predicted)");
    let cell = m
        .confusion
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .max()
        .unwrap_or(1);
    for (c, row) in m.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>cell$}")).collect();
        let _ = writeln!(out, "{:<width$}  {}", name(c), cells.join(" "));
    }
    out
}

/// Machine-readable aggregates, one `key=value` per line.
pub fn format_key_values(m: &Metrics) -> String {
    format!(
        "accuracy={}\nweighted_precision={}\nweighted_recall={}\nweighted_f1={}\n",
        percent(m.accuracy),
        percent(m.weighted_precision),
        percent(m.weighted_recall),
        percent(m.weighted_f1)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let m = compute_metrics(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m.precision, vec![1.0, 0.5]);
        assert_eq!(m.recall, vec![0.5, 1.0]);
        assert!((m.f1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.weighted_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.confusion, vec![vec![1, 1], vec![0, 1]]);
        assert!(format_key_values(&m).contains("weighted_f1=66.67\n"));
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 2, 1, 2, 0];
        let m = compute_metrics(&y, &y, 3).unwrap();
        assert_eq!((m.accuracy, m.weighted_precision, m.weighted_recall, m.weighted_f1), (1.0, 1.0, 1.0, 1.0));
        for (i, row) in m.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v == 0, i != j || m.support[i] == 0);
            }
        }
        assert!(format_report(&m, &[]).contains("weighted_f1=100.00"));
    }

    #[test]
    fn absent_class_has_no_weight() {
        let m = compute_metrics(&[0, 1, 1], &[0, 1, 0], 3).unwrap();
        assert_eq!(m.support[2], 0);
        assert_eq!((m.precision[2], m.recall[2], m.f1[2]), (0.0, 0.0, 0.0));
        let two = compute_metrics(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        assert_eq!(m.weighted_f1, two.weighted_f1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compute_metrics(&[0, 1], &[0], 2).is_err());
        assert!(compute_metrics(&[], &[], 2).is_err());
        assert!(matches!(
            compute_metrics(&[0, 2], &[0, 1], 2),
            Err(Error::OutOfRange { index: 2, size: 2 })
        ));
    }

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(percent(0.82625), "82.63");
        assert_eq!(percent(0.6744), "67.44");
        assert_eq!(percent(1.0), "100.00");
        assert_eq!(percent(0.0), "0.00");
        assert_eq!(percent(2.0 / 3.0), "66.67");
        assert_eq!(percent(0.00005), "0.01");
        assert_eq!(percent(0.123449), "12.34");
    }

    #[test]
    fn report_layout() {
        let m = compute_metrics(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        let names = vec!["cse".to_string(), "physics".to_string()];
        let r = format_report(&m, &names);
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines[0], "accuracy=66.67");
        assert_eq!(lines[3], "weighted_f1=66.67");
        assert!(r.contains("physics"));
        assert!(r.contains("confusion"));
        assert!(r.trim_end().ends_with("physics  0 1"));
    }

    proptest! {
        #[test]
        fn weighted_recall_is_accuracy(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)) {
            let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let m = compute_metrics(&t, &p, 5).unwrap();
            prop_assert_eq!(m.weighted_recall, m.accuracy);
            prop_assert_eq!(m.confusion.iter().flatten().sum::<usize>(), t.len());
            for v in [m.weighted_precision, m.weighted_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
