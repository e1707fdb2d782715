use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::calibration::{calibrate_all, CalibrationParams};
use crate::error::Result;
use crate::forest::{self, FeatureMatrix, ForestConfig, ForestModel};
use crate::metrics::{metric_set, Metric, MetricSet};
use crate::seed::{rng_from_seed, stream_seed, Stream};
use crate::sfi::{cohort_mean_sfi, cohort_sfi};
use crate::sim::{generate_cohort, CodeRegistry, Cohort, PatientRecord};

pub struct ReferenceResult {
    pub model: ForestModel,
    pub metrics: MetricSet,
    pub ref_mean_sfi: f64,
}

pub(crate) fn labels_of(patients: &[PatientRecord]) -> Vec<bool> {
    patients.iter().map(|p| p.dementia_label).collect()
}

/// Build, split and score the reference cohort of one batch.
pub fn run_reference(
    run: &RunConfig,
    batch: u64,
    registry: &CodeRegistry,
) -> Result<ReferenceResult> {
    let master = run.master_seed;
    let mut rng = rng_from_seed(stream_seed(master, batch, Stream::ReferenceCohort));
    let cohort_cfg = run.sample_cohort_config(run.reference_cohort_size, &mut rng)?;
    let cohort = generate_cohort(&cohort_cfg, registry)?;
    let (train, test) = forest::split_half(
        &cohort.patients,
        stream_seed(master, batch, Stream::ReferenceSplit),
    );
    let forest_cfg = ForestConfig {
        seed: stream_seed(master, batch, Stream::Forest),
        ..run.forest.clone()
    };
    let model = forest::train(
        &FeatureMatrix::demographics(&train),
        &labels_of(&train),
        &forest_cfg,
    )?;
    let probs = model.predict_proba(&FeatureMatrix::demographics(&test))?;
    let metrics = metric_set(&labels_of(&test), &probs, run.threshold)?;
    Ok(ReferenceResult {
        model,
        metrics,
        ref_mean_sfi: cohort_mean_sfi(&train)?,
    })
}

/// Testing dataset `dataset` of batch `batch`, with freshly drawn
/// population parameters.
pub fn dataset_cohort(
    run: &RunConfig,
    batch: u64,
    dataset: u64,
    registry: &CodeRegistry,
) -> Result<Cohort> {
    let mut rng = rng_from_seed(stream_seed(
        run.master_seed,
        batch,
        Stream::Dataset(dataset),
    ));
    let cfg = run.sample_cohort_config(run.dataset_size, &mut rng)?;
    generate_cohort(&cfg, registry)
}

/// Raw and calibrated metrics for one testing dataset. `calibrated[k]`
/// corresponds to the k-th α passed to [`run_batch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub dataset: usize,
    pub prevalence: f64,
    pub mean_sfi: f64,
    pub raw: MetricSet,
    pub calibrated: Vec<MetricSet>,
}

/// Score every testing dataset of a batch. Datasets are processed in
/// parallel; each draws from its own RNG stream.
pub fn run_batch(
    run: &RunConfig,
    batch: u64,
    model: &ForestModel,
    ref_mean_sfi: f64,
    alphas: &[f64],
    registry: &CodeRegistry,
) -> Result<Vec<DatasetResult>> {
    let params: Vec<CalibrationParams> = alphas
        .iter()
        .map(|&a| CalibrationParams::new(a, ref_mean_sfi))
        .collect::<Result<_>>()?;
    (0..run.datasets_per_batch)
        .into_par_iter()
        .map(|j| {
            let cohort = dataset_cohort(run, batch, j as u64, registry)?;
            let labels = labels_of(&cohort.patients);
            let raw = model.predict_proba(&FeatureMatrix::demographics(&cohort.patients))?;
            let sfi: Vec<f64> = cohort_sfi(&cohort.patients)?
                .into_iter()
                .map(|s| s.composite)
                .collect();
            let calibrated = params
                .iter()
                .map(|p| metric_set(&labels, &calibrate_all(&raw, &sfi, p)?, run.threshold))
                .collect::<Result<Vec<_>>>()?;
            Ok(DatasetResult {
                dataset: j,
                prevalence: labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64,
                mean_sfi: sfi.iter().sum::<f64>() / sfi.len() as f64,
                raw: metric_set(&labels, &raw, run.threshold)?,
                calibrated,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub batch: usize,
    pub ref_mean_sfi: f64,
    pub reference: MetricSet,
    pub alphas: Vec<f64>,
    pub datasets: Vec<DatasetResult>,
}

/// Run every batch (in parallel) with the given α list.
pub fn run_batches(
    run: &RunConfig,
    alphas: &[f64],
    registry: &CodeRegistry,
) -> Result<Vec<BatchResult>> {
    run.validate()?;
    (0..run.n_batches)
        .into_par_iter()
        .map(|b| {
            let reference = run_reference(run, b as u64, registry)?;
            let datasets = run_batch(
                run,
                b as u64,
                &reference.model,
                reference.ref_mean_sfi,
                alphas,
                registry,
            )?;
            Ok(BatchResult {
                batch: b,
                ref_mean_sfi: reference.ref_mean_sfi,
                reference: reference.metrics,
                alphas: alphas.to_vec(),
                datasets,
            })
        })
        .collect()
}

/// Batch-level means of raw and calibrated metrics. `calibrated[k]` pairs
/// with `alphas[k]`; each mean runs over the datasets where the metric is
/// defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch: usize,
    pub reference: MetricSet,
    pub alphas: Vec<f64>,
    pub raw: MetricSet,
    pub calibrated: Vec<MetricSet>,
}

impl BatchSummary {
    pub fn calibrated_at(&self, alpha: f64) -> Option<&MetricSet> {
        self.alphas
            .iter()
            .position(|&a| a == alpha)
            .map(|k| &self.calibrated[k])
    }
}

fn defined_mean<'a>(sets: impl Iterator<Item = &'a MetricSet>, metric: Metric) -> Option<f64> {
    let (sum, n) = sets
        .filter_map(|s| s.get(metric))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub(crate) fn mean_metric_set<'a, I>(sets: I) -> MetricSet
where
    I: Iterator<Item = &'a MetricSet> + Clone,
{
    let m = |metric| defined_mean(sets.clone(), metric);
    MetricSet {
        auc: m(Metric::Auc),
        balanced_accuracy: m(Metric::BalancedAccuracy),
        detection_rate: m(Metric::DetectionRate),
        f1: m(Metric::F1),
        precision: m(Metric::Precision),
        recall: m(Metric::Recall),
        brier: m(Metric::Brier),
    }
}

pub fn summarize(result: &BatchResult) -> BatchSummary {
    BatchSummary {
        batch: result.batch,
        reference: result.reference,
        alphas: result.alphas.clone(),
        raw: mean_metric_set(result.datasets.iter().map(|d| &d.raw)),
        calibrated: (0..result.alphas.len())
            .map(|k| mean_metric_set(result.datasets.iter().map(move |d| &d.calibrated[k])))
            .collect(),
    }
}
