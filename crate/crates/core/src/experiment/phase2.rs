//! Batch-level comparison of raw, calibrated and reference performance.

use serde::{Deserialize, Serialize};

use super::BatchSummary;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricSet};
use crate::stats::{
    bonferroni, cohens_d_avgvar, cohens_d_pooled, mean_ci_t, paired_t_test, EffectSize, TestResult,
};

const COMPARISONS_PER_METRIC: usize = 3;

/// Mean with a 95% t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Interval {
    pub fn of(sample: &[f64]) -> Result<Self> {
        let (mean, ci_low, ci_high) = mean_ci_t(sample, 0.95)?;
        Ok(Interval {
            n: sample.len(),
            mean,
            ci_low,
            ci_high,
        })
    }
}

/// A paired t test together with its Bonferroni-adjusted p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub test: TestResult,
    pub p_bonferroni: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2MetricRow {
    pub metric: Metric,
    pub raw: Interval,
    pub calibrated: Interval,
    pub reference: Interval,
    /// `mean(cal) − mean(raw)` over batches.
    pub improvement: f64,
    /// Improvement relative to the raw mean, in percent; undefined when the
    /// raw mean is zero.
    pub percent_improvement: Option<f64>,
    pub cal_vs_raw: Comparison,
    pub cal_vs_ref: Comparison,
    pub raw_vs_ref: Comparison,
    /// Calibrated vs raw, pooled-SD form. `None` when the pooled SD is zero.
    pub cohens_d_pooled: Option<EffectSize>,
    /// Calibrated vs raw, average-variance form.
    pub cohens_d_avgvar: Option<EffectSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Report {
    pub alpha: f64,
    pub n_batches: usize,
    /// Family size used for the Bonferroni column.
    pub comparisons: usize,
    pub rows: Vec<Phase2MetricRow>,
}

/// Per-batch (raw, calibrated, reference) values where all three are defined.
fn triples(
    summaries: &[BatchSummary],
    alpha: f64,
    metric: Metric,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut raw = Vec::new();
    let mut cal = Vec::new();
    let mut reference = Vec::new();
    for s in summaries {
        let c = calibrated_at(s, alpha)?;
        if let (Some(r), Some(c), Some(f)) =
            (s.raw.get(metric), c.get(metric), s.reference.get(metric))
        {
            raw.push(r);
            cal.push(c);
            reference.push(f);
        }
    }
    Ok((raw, cal, reference))
}

fn calibrated_at(s: &BatchSummary, alpha: f64) -> Result<&MetricSet> {
    s.calibrated_at(alpha).ok_or_else(|| {
        Error::domain(format!(
            "batch {} was not evaluated at alpha {alpha}",
            s.batch
        ))
    })
}

fn optional_effect(r: Result<EffectSize>) -> Result<Option<EffectSize>> {
    match r {
        Ok(e) => Ok(Some(e)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn compare(x: &[f64], y: &[f64], family: usize) -> Result<Comparison> {
    let test = paired_t_test(x, y)?;
    let p_bonferroni = test.p_value.map(|p| bonferroni(p, family));
    Ok(Comparison { test, p_bonferroni })
}

/// Paired comparisons of batch means at `alpha` for every metric.
pub fn phase2_analysis(summaries: &[BatchSummary], alpha: f64) -> Result<Phase2Report> {
    if summaries.len() < 2 {
        return Err(Error::domain("phase 2 needs at least two batches"));
    }
    let family = Metric::ALL.len() * COMPARISONS_PER_METRIC;
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        let (raw, cal, reference) = triples(summaries, alpha, metric)?;
        if raw.len() < 2 {
            log::warn!("{metric}: fewer than two batches with defined values, skipped");
            continue;
        }
        let raw_i = Interval::of(&raw)?;
        let cal_i = Interval::of(&cal)?;
        let improvement = cal_i.mean - raw_i.mean;
        rows.push(Phase2MetricRow {
            metric,
            raw: raw_i,
            calibrated: cal_i,
            reference: Interval::of(&reference)?,
            improvement,
            percent_improvement: (raw_i.mean != 0.0).then(|| 100.0 * improvement / raw_i.mean),
            cal_vs_raw: compare(&cal, &raw, family)?,
            cal_vs_ref: compare(&cal, &reference, family)?,
            raw_vs_ref: compare(&raw, &reference, family)?,
            cohens_d_pooled: optional_effect(cohens_d_pooled(&cal, &raw))?,
            cohens_d_avgvar: optional_effect(cohens_d_avgvar(&cal, &raw))?,
        });
    }
    Ok(Phase2Report {
        alpha,
        n_batches: summaries.len(),
        comparisons: family,
        rows,
    })
}

/// Distance of raw and calibrated performance from the reference standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub metric: Metric,
    pub raw: f64,
    pub calibrated: f64,
    pub reference: f64,
    pub d_raw: f64,
    pub d_cal: f64,
    pub reduction: f64,
    /// `reduction / d_raw × 100`; undefined when `d_raw = 0`.
    pub percent_closer: Option<f64>,
    /// Paired t test of per-batch distances `|raw − ref|` vs `|cal − ref|`.
    pub p_value: Option<f64>,
}

impl DistanceRow {
    pub fn from_means(metric: Metric, raw: f64, calibrated: f64, reference: f64) -> Self {
        let d_raw = (raw - reference).abs();
        let d_cal = (calibrated - reference).abs();
        let reduction = d_raw - d_cal;
        DistanceRow {
            metric,
            raw,
            calibrated,
            reference,
            d_raw,
            d_cal,
            reduction,
            percent_closer: (d_raw > 0.0).then(|| 100.0 * reduction / d_raw),
            p_value: None,
        }
    }
}

/// Distances are taken between the means over batches; the p-value comes
/// from the per-batch distances.
pub fn distance_analysis(summaries: &[BatchSummary], alpha: f64) -> Result<Vec<DistanceRow>> {
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        let (raw, cal, reference) = triples(summaries, alpha, metric)?;
        if raw.is_empty() {
            continue;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut row = DistanceRow::from_means(metric, mean(&raw), mean(&cal), mean(&reference));
        if raw.len() >= 2 {
            let d_raw: Vec<f64> = raw
                .iter()
                .zip(&reference)
                .map(|(a, r)| (a - r).abs())
                .collect();
            let d_cal: Vec<f64> = cal
                .iter()
                .zip(&reference)
                .map(|(c, r)| (c - r).abs())
                .collect();
            row.p_value = paired_t_test(&d_raw, &d_cal)?.p_value;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(batch: usize, raw: f64, cal: f64, reference: f64) -> BatchSummary {
        let set = |v| MetricSet {
            auc: Some(v),
            balanced_accuracy: Some(v),
            detection_rate: Some(v),
            f1: Some(v),
            precision: Some(v),
            recall: Some(v),
            brier: Some(v),
        };
        BatchSummary {
            batch,
            reference: set(reference),
            alphas: vec![1.0],
            raw: set(raw),
            calibrated: vec![set(cal)],
        }
    }

    #[test]
    fn distance_examples() {
        let r = DistanceRow::from_means(Metric::Recall, 0.6, 0.7, 0.72);
        assert!((r.d_raw - 0.12).abs() < 1e-12);
        assert!((r.d_cal - 0.02).abs() < 1e-12);
        assert!((r.reduction - 0.10).abs() < 1e-12);
        assert!((r.percent_closer.unwrap() - 83.333_333).abs() < 1e-4);

        let r = DistanceRow::from_means(Metric::Recall, 0.6, 0.72, 0.72);
        assert_eq!(r.percent_closer, Some(100.0));

        let r = DistanceRow::from_means(Metric::Recall, 0.6, 0.84, 0.72);
        assert!(r.reduction.abs() < 1e-12);
        assert!(r.percent_closer.unwrap().abs() < 1e-9);

        let r = DistanceRow::from_means(Metric::Recall, 0.7, 0.8, 0.7);
        assert_eq!(r.percent_closer, None);
    }

    #[test]
    fn identical_inputs_give_zero_improvement() {
        let s: Vec<_> = [0.5, 0.6, 0.7]
            .iter()
            .enumerate()
            .map(|(i, &v)| summary(i, v, v, 0.8))
            .collect();
        let rep = phase2_analysis(&s, 1.0).unwrap();
        assert_eq!(rep.rows.len(), 7);
        for row in &rep.rows {
            assert_eq!(row.improvement, 0.0);
            assert!(row.cal_vs_raw.test.degenerate);
            assert_eq!(row.cal_vs_raw.test.p_value, None);
            assert_eq!(row.cohens_d_pooled.unwrap().d, 0.0);
        }
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let s: Vec<_> = [0.5, 0.6, 0.7]
            .iter()
            .enumerate()
            .map(|(i, &v)| summary(i, v, v + 0.1, 0.8))
            .collect();
        let rep = phase2_analysis(&s, 1.0).unwrap();
        let row = &rep.rows[0];
        assert!((row.improvement - 0.1).abs() < 1e-12);
        assert!(row.cal_vs_raw.test.degenerate);
        assert!(row.raw_vs_ref.test.p_value.is_some());
    }

    #[test]
    fn unknown_alpha_is_an_error() {
        let s = vec![summary(0, 0.5, 0.6, 0.7), summary(1, 0.4, 0.6, 0.7)];
        assert!(phase2_analysis(&s, 2.0).is_err());
        assert!(phase2_analysis(&s[..1], 1.0).is_err());
    }
}
