//! Thresholded classification metrics, rank AUC and Brier score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    BalancedAccuracy,
    DetectionRate,
    F1,
    Precision,
    Recall,
    Brier,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Auc,
        Metric::BalancedAccuracy,
        Metric::DetectionRate,
        Metric::F1,
        Metric::Precision,
        Metric::Recall,
        Metric::Brier,
    ];

    /// The six metrics where larger is better.
    pub const PERFORMANCE: [Metric; 6] = [
        Metric::Auc,
        Metric::BalancedAccuracy,
        Metric::DetectionRate,
        Metric::F1,
        Metric::Precision,
        Metric::Recall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::DetectionRate => "detection_rate",
            Metric::F1 => "f1",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Brier => "brier",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Metric::Brier
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `None` marks a metric whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub detection_rate: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub brier: Option<f64>,
}

impl MetricSet {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Auc => self.auc,
            Metric::BalancedAccuracy => self.balanced_accuracy,
            Metric::DetectionRate => self.detection_rate,
            Metric::F1 => self.f1,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::Brier => self.brier,
        }
    }
}

fn check_inputs(labels: &[bool], probs: &[f64]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::domain("metrics need at least one prediction"));
    }
    if labels.len() != probs.len() {
        return Err(Error::domain(format!(
            "{} labels but {} probabilities",
            labels.len(),
            probs.len()
        )));
    }
    Ok(())
}

/// Confusion counts; `prob >= threshold` is a positive call.
pub fn confusion(labels: &[bool], probs: &[f64], threshold: f64) -> Result<Confusion> {
    check_inputs(labels, probs)?;
    let mut c = Confusion::default();
    for (&y, &p) in labels.iter().zip(probs) {
        match (y, p >= threshold) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Every ratio is formed from exact integer counts and rounded once, so the
/// values are the correctly rounded rationals.
pub fn metric_set(labels: &[bool], probs: &[f64], threshold: f64) -> Result<MetricSet> {
    let c = confusion(labels, probs, threshold)?;
    let n = c.total();
    let (pos, neg) = (c.tp + c.fn_, c.tn + c.fp);
    let f1 = (c.tp > 0).then(|| (2 * c.tp) as f64 / (2 * c.tp + c.fp + c.fn_) as f64);
    // (recall + specificity) / 2 over a common denominator
    let balanced_accuracy = (pos > 0 && neg > 0).then(|| {
        let num = c.tp as u128 * neg as u128 + c.tn as u128 * pos as u128;
        num as f64 / (2 * pos as u128 * neg as u128) as f64
    });
    Ok(MetricSet {
        auc: auc(labels, probs)?,
        balanced_accuracy,
        detection_rate: ratio(c.tp, n),
        f1,
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, pos),
        brier: Some(brier(labels, probs)?),
    })
}

pub fn brier(labels: &[bool], probs: &[f64]) -> Result<f64> {
    check_inputs(labels, probs)?;
    let total: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| (p - f64::from(u8::from(y))).powi(2))
        .sum();
    Ok(total / labels.len() as f64)
}

/// Probability that a random positive outscores a random negative, counting
/// ties as one half. Computed from mid-ranks in `O(n log n)`. Returns
/// `None` when only one class is present.
pub fn auc(labels: &[bool], probs: &[f64]) -> Result<Option<f64>> {
    check_inputs(labels, probs)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    // Sum of doubled mid-ranks of the positives, kept integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1, doubled mid-rank = i + j + 2
        let mid2 = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += mid2 * pos_in_group;
        i = j + 1;
    }
    let np = n_pos as u128;
    // 2·U = 2·R − n_pos(n_pos + 1)
    let u2 = rank_sum2 - np * (np + 1);
    Ok(Some(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let labels = [true, false, true, false];
        let preds = [1.0, 1.0, 0.0, 0.0];
        let c = confusion(&labels, &preds, 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        let c = confusion(&labels, &[1.0, 0.0, 1.0, 0.0], 0.5).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&[true], &[0.5], 0.5).unwrap();
        assert_eq!(c.tp, 1);
        assert!(confusion(&[], &[], 0.5).is_err());
    }

    #[test]
    fn metric_set_example() {
        let m = metric_set(&[true, false, true, false], &[1.0, 1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(m.precision, Some(0.5));
        assert_eq!(m.recall, Some(0.5));
        assert_eq!(m.f1, Some(0.5));
        assert_eq!(m.balanced_accuracy, Some(0.5));
        assert_eq!(m.detection_rate, Some(0.25));
    }

    #[test]
    fn perfect_predictions() {
        let labels = [true, false, false, true, false];
        let probs = [1.0, 0.0, 0.0, 1.0, 0.0];
        let m = metric_set(&labels, &probs, 0.5).unwrap();
        assert_eq!(m.brier, Some(0.0));
        for v in [m.auc, m.balanced_accuracy, m.f1, m.precision, m.recall] {
            assert_eq!(v, Some(1.0));
        }
        assert_eq!(m.detection_rate, Some(0.4));
    }

    #[test]
    fn undefined_metrics() {
        // no predicted positives: precision undefined, single class: auc undefined
        let m = metric_set(&[false, false], &[0.1, 0.2], 0.5).unwrap();
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.auc, None);
        assert_eq!(m.detection_rate, Some(0.0));
    }

    #[test]
    fn auc_examples() {
        let labels = [true, true, false, false];
        assert_eq!(auc(&labels, &[0.9, 0.8, 0.4, 0.2]).unwrap(), Some(1.0));
        assert_eq!(auc(&labels, &[0.3; 4]).unwrap(), Some(0.5));
        // pairs: (0.9,0.8) (0.9,0.4) (0.2,0.8) (0.2,0.4) -> 2 concordant of 4
        assert_eq!(auc(&labels, &[0.9, 0.2, 0.8, 0.4]).unwrap(), Some(0.5));
        assert_eq!(auc(&[true, true], &[0.1, 0.2]).unwrap(), None);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("nope".parse::<Metric>().is_err());
    }
}
