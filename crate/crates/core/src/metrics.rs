//! Classification and presentation-attack-detection error rates.
//!
//! The positive class is the attack (morphed, label 1). A rate whose
//! denominator is zero is reported as undefined (`None`), never as 0.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no samples to score".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            _ => return Err(Error::ClassOutOfRange { index: p.max(l), classes: 2 }),
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub apcer: Option<f64>,
    pub bpcer: Option<f64>,
    pub hter: Option<f64>,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let sum = precision + recall;
    (sum > 0.0).then(|| 2.0 * precision * recall / sum)
}

pub fn half_total_error_rate(apcer: f64, bpcer: f64) -> f64 {
    (apcer + bpcer) / 2.0
}

pub fn compute_metrics(counts: &ConfusionCounts) -> MetricsReport {
    let ConfusionCounts { tp, tn, fp, fn_ } = *counts;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let apcer = ratio(fn_, fn_ + tp);
    let bpcer = ratio(fp, tn + fp);
    MetricsReport {
        accuracy: ratio(tp + tn, counts.total()),
        precision,
        recall,
        f1: precision.zip(recall).and_then(|(p, r)| f1_score(p, r)),
        apcer,
        bpcer,
        hter: apcer.zip(bpcer).map(|(a, b)| half_total_error_rate(a, b)),
        counts: *counts,
    }
}

/// Checks the algebraic ties between metrics that are defined:
/// HTER is the APCER/BPCER mean, F1 the precision/recall harmonic mean,
/// and recall the complement of APCER.
pub fn identity_check(report: &MetricsReport) -> bool {
    const TOL: f64 = 1e-12;
    let close = |a: f64, b: f64| (a - b).abs() <= TOL;
    let hter_ok = match (report.hter, report.apcer, report.bpcer) {
        (Some(h), Some(a), Some(b)) => close(h, half_total_error_rate(a, b)),
        (None, Some(_), Some(_)) => false,
        _ => true,
    };
    let f1_ok = match (report.f1, report.precision, report.recall) {
        (Some(f), Some(p), Some(r)) => close(f, 2.0 * p * r / (p + r)),
        (Some(_), _, _) => false,
        _ => true,
    };
    let recall_ok = match (report.recall, report.apcer) {
        (Some(r), Some(a)) => close(r, 1.0 - a),
        (None, None) => true,
        _ => false,
    };
    hter_ok && f1_ok && recall_ok
}

impl MetricsReport {
    /// Flat `metric=value` text, `undefined` for flagged metrics.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let rows = [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("apcer", self.apcer),
            ("bpcer", self.bpcer),
            ("hter", self.hter),
        ];
        for (name, value) in rows {
            match value {
                Some(v) => writeln!(out, "{name}={v}"),
                None => writeln!(out, "{name}=undefined"),
            }
            .expect("writing to a String");
        }
        let c = self.counts;
        write!(out, "tp={}\ntn={}\nfp={}\nfn={}\n", c.tp, c.tn, c.fp, c.fn_).expect("writing to a String");
        out
    }
}
