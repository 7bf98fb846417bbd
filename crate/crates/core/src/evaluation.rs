//! Confusion matrices and the accuracy/F1 family of scores.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `C x C` counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::InvalidInput(format!(
                "{} true labels but {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        if y_true.is_empty() {
            return Err(Error::InvalidInput("nothing to evaluate".into()));
        }
        let mut counts = vec![0; n_classes * n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::InvalidInput(format!(
                    "label pair ({t}, {p}) out of range for {n_classes} classes"
                )));
            }
            counts[t * n_classes + p] += 1;
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::InvalidInput(format!(
                "{} counts do not form a {n_classes}x{n_classes} matrix",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes + predicted]
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.n_classes).map(|j| self.get(c, j)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    fn check_nonempty(&self) -> Result<u64> {
        match self.total() {
            0 => Err(Error::InvalidInput("confusion matrix is empty".into())),
            t => Ok(t),
        }
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.check_nonempty()?;
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// `1 - support / total` per class.
    pub weights: Vec<f64>,
    pub macro_f1: f64,
    /// `sum w_c F1_c / sum w_c`.
    pub weighted_f1: f64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-class scores with 0/0 taken as 0.
pub fn f1_scores(cm: &ConfusionMatrix) -> Result<F1Scores> {
    let total = cm.check_nonempty()?;
    let c = cm.n_classes();
    let mut out = F1Scores {
        precision: Vec::with_capacity(c),
        recall: Vec::with_capacity(c),
        f1: Vec::with_capacity(c),
        weights: Vec::with_capacity(c),
        macro_f1: 0.0,
        weighted_f1: 0.0,
    };
    for k in 0..c {
        let tp = cm.get(k, k);
        let p = ratio(tp, cm.col_sum(k));
        let r = ratio(tp, cm.row_sum(k));
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        out.precision.push(p);
        out.recall.push(r);
        out.f1.push(f);
        out.weights.push(1.0 - cm.row_sum(k) as f64 / total as f64);
    }
    out.macro_f1 = out.f1.iter().sum::<f64>() / c as f64;
    let wsum: f64 = out.weights.iter().sum();
    out.weighted_f1 = if wsum > 0.0 {
        out.weights.iter().zip(&out.f1).map(|(w, f)| w * f).sum::<f64>() / wsum
    } else {
        out.macro_f1
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub scores: F1Scores,
}

impl EvalReport {
    pub fn new(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        let confusion = ConfusionMatrix::new(y_true, y_pred, n_classes)?;
        Ok(EvalReport {
            accuracy: accuracy(&confusion)?,
            scores: f1_scores(&confusion)?,
            confusion,
        })
    }

    pub fn macro_f1(&self) -> f64 {
        self.scores.macro_f1
    }

    pub fn weighted_f1(&self) -> f64 {
        self.scores.weighted_f1
    }

    /// Text rendering with class names taken from `labels`.
    pub fn render(&self, labels: &[String]) -> String {
        ReportView {
            report: self,
            labels,
        }
        .to_string()
    }
}

struct ReportView<'a> {
    report: &'a EvalReport,
    labels: &'a [String],
}

impl fmt::Display for ReportView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.report;
        writeln!(f, "accuracy     {:.4}", r.accuracy)?;
        writeln!(f, "macro F1     {:.4}", r.scores.macro_f1)?;
        writeln!(f, "weighted F1  {:.4}", r.scores.weighted_f1)?;
        writeln!(f)?;
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:width$}  precision  recall  f1      support", "class")?;
        for (c, label) in self.labels.iter().enumerate() {
            writeln!(
                f,
                "{label:width$}  {:.4}     {:.4}  {:.4}  {}",
                r.scores.precision[c],
                r.scores.recall[c],
                r.scores.f1[c],
                r.confusion.row_sum(c)
            )?;
        }
        writeln!(f)?;
        writeln!(f, "confusion matrix (rows true, columns predicted)")?;
        for i in 0..r.confusion.n_classes() {
            let row: Vec<String> = (0..r.confusion.n_classes())
                .map(|j| r.confusion.get(i, j).to_string())
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}
