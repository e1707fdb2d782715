//! One model, many datasets: train on dataset 0 and apply the model without
//! retraining to every other dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::labels_of;
use super::RunConfig;
use crate::calibration::{calibrate_all, calibration_error_delta, CalibrationParams};
use crate::error::{Error, Result};
use crate::forest::{self, FeatureMatrix, ForestConfig};
use crate::metrics::{metric_set, Metric, MetricSet};
use crate::seed::{rng_from_seed, stream_seed, Stream};
use crate::sfi::{cohort_mean_sfi, cohort_sfi};
use crate::sim::{generate_cohort, CodeRegistry};
use crate::stats::{cohens_d_avgvar, mean, wilcoxon_signed_rank, Magnitude};

pub const TRANSFER_METRICS: [Metric; 5] = [
    Metric::Auc,
    Metric::Recall,
    Metric::F1,
    Metric::BalancedAccuracy,
    Metric::Brier,
];

/// Batch coordinate of the transfer streams, outside the batch index space.
pub const TRANSFER_BATCH: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferDataset {
    pub dataset: usize,
    pub prevalence: f64,
    pub mean_sfi: f64,
    pub raw: MetricSet,
    pub calibrated: MetricSet,
    /// Reduction in squared error from calibration.
    pub delta_error: f64,
}

/// Signed-rank comparison of calibrated against raw for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub metric: Metric,
    pub n_pairs: usize,
    pub raw_mean: f64,
    pub calibrated_mean: f64,
    pub median_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub cohens_d: Option<f64>,
    pub magnitude: Option<Magnitude>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub alpha: f64,
    pub ref_mean_sfi: f64,
    pub training_metrics: MetricSet,
    pub datasets: Vec<TransferDataset>,
    pub rows: Vec<TransferRow>,
    pub mean_delta_error: f64,
}

pub fn transfer_eval(run: &RunConfig, registry: &CodeRegistry) -> Result<TransferReport> {
    if run.transfer_datasets < 2 {
        return Err(Error::domain(
            "transfer evaluation needs at least two datasets",
        ));
    }
    let alpha = run.transfer_alpha;
    let cohort_for = |j: usize| {
        let mut rng = rng_from_seed(stream_seed(
            run.master_seed,
            TRANSFER_BATCH,
            Stream::TransferDataset(j as u64),
        ));
        let cfg = run.sample_cohort_config(run.dataset_size, &mut rng)?;
        generate_cohort(&cfg, registry)
    };

    let train = cohort_for(0)?.patients;
    let train_labels = labels_of(&train);
    let train_x = FeatureMatrix::demographics(&train);
    let forest_cfg = ForestConfig {
        seed: stream_seed(run.master_seed, TRANSFER_BATCH, Stream::TransferForest),
        ..run.forest.clone()
    };
    let model = forest::train(&train_x, &train_labels, &forest_cfg)?;
    let training_metrics = metric_set(
        &train_labels,
        &model.predict_proba(&train_x)?,
        run.threshold,
    )?;
    let ref_mean_sfi = cohort_mean_sfi(&train)?;
    let params = CalibrationParams::new(alpha, ref_mean_sfi)?;

    let datasets: Vec<TransferDataset> = (1..run.transfer_datasets)
        .into_par_iter()
        .map(|j| {
            let patients = cohort_for(j)?.patients;
            let labels = labels_of(&patients);
            let raw = model.predict_proba(&FeatureMatrix::demographics(&patients))?;
            let sfi: Vec<f64> = cohort_sfi(&patients)?
                .into_iter()
                .map(|s| s.composite)
                .collect();
            let cal = calibrate_all(&raw, &sfi, &params)?;
            Ok(TransferDataset {
                dataset: j,
                prevalence: labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64,
                mean_sfi: mean(&sfi),
                raw: metric_set(&labels, &raw, run.threshold)?,
                calibrated: metric_set(&labels, &cal, run.threshold)?,
                delta_error: calibration_error_delta(&labels, &raw, &cal)?,
            })
        })
        .collect::<Result<_>>()?;

    let rows = TRANSFER_METRICS
        .iter()
        .map(|&m| transfer_row(m, &datasets))
        .collect::<Result<_>>()?;
    let mean_delta_error = mean(&datasets.iter().map(|d| d.delta_error).collect::<Vec<_>>());
    Ok(TransferReport {
        alpha,
        ref_mean_sfi,
        training_metrics,
        datasets,
        rows,
        mean_delta_error,
    })
}

fn transfer_row(metric: Metric, datasets: &[TransferDataset]) -> Result<TransferRow> {
    let (cal, raw): (Vec<f64>, Vec<f64>) = datasets
        .iter()
        .filter_map(|d| Some((d.calibrated.get(metric)?, d.raw.get(metric)?)))
        .unzip();
    if cal.is_empty() {
        return Ok(TransferRow {
            metric,
            n_pairs: 0,
            raw_mean: f64::NAN,
            calibrated_mean: f64::NAN,
            median_difference: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            statistic: None,
            p_value: None,
            cohens_d: None,
            magnitude: None,
            degenerate: true,
        });
    }
    let w = wilcoxon_signed_rank(&cal, &raw)?;
    let d = match cohens_d_avgvar(&cal, &raw) {
        Ok(e) => Some(e),
        Err(Error::Degenerate(_) | Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TransferRow {
        metric,
        n_pairs: cal.len(),
        raw_mean: mean(&raw),
        calibrated_mean: mean(&cal),
        median_difference: w.estimate,
        ci_low: w.ci_low,
        ci_high: w.ci_high,
        statistic: w.statistic,
        p_value: w.p_value,
        cohens_d: d.map(|e| e.d),
        magnitude: d.map(|e| e.magnitude),
        degenerate: w.degenerate || d.is_none() || cal.len() < 2,
    })
}
