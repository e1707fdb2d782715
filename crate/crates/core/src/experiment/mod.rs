//! Batch experiment driver.
//!
//! A run consists of `n_batches` independent batches. Each batch builds a
//! reference cohort, splits it in half, trains a forest on one half and
//! scores the other half to obtain reference metrics. It then generates
//! `datasets_per_batch` testing datasets with freshly drawn population
//! parameters, scores them with the batch's forest, and evaluates raw and
//! fidelity-calibrated predictions across an α grid.
//!
//! Phase 1 sweeps the grid and picks a recommended α with a significance
//! plateau rule. Phase 2 compares raw, calibrated and reference performance
//! at that α over batch-level means. A separate transfer evaluation applies
//! one model to many datasets without retraining.

mod batch;
mod phase1;
mod phase2;
mod transfer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::sim::{sample_race_mix, CohortConfig};

pub use batch::{
    dataset_cohort, run_batch, run_batches, run_reference, summarize, BatchResult, BatchSummary,
    DatasetResult, ReferenceResult,
};
pub use phase1::{
    alpha_sweep, median_on_grid, phase1_select_alpha, plateau_alpha, AlphaSweepRow, MetricOptimum,
    Phase1Selection, SelectionRule,
};
pub use phase2::{
    distance_analysis, phase2_analysis, Comparison, DistanceRow, Interval, Phase2MetricRow,
    Phase2Report,
};
pub use transfer::{
    transfer_eval, TransferDataset, TransferReport, TransferRow, TRANSFER_BATCH, TRANSFER_METRICS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_batches: usize,
    pub datasets_per_batch: usize,
    pub reference_cohort_size: usize,
    pub dataset_size: usize,
    /// Strictly increasing calibration strengths evaluated in phase 1.
    pub alpha_grid: Vec<f64>,
    /// Upper bound on any selected α.
    pub alpha_cap: f64,
    pub master_seed: u64,
    /// Range of the per-dataset base dementia rate.
    pub prevalence_range: [f64; 2],
    pub age_mean_range: [f64; 2],
    /// Dirichlet concentration of the per-dataset race mix.
    pub race_concentration: [f64; 5],
    /// Template for every generated cohort. Its size, seed, base rate, age
    /// mean and race mix are overwritten per dataset.
    pub cohort: CohortConfig,
    /// Forest hyperparameters. The seed is overwritten per batch.
    pub forest: ForestConfig,
    pub threshold: f64,
    pub significance_level: f64,
    /// Datasets in the transfer evaluation, including the training dataset 0.
    pub transfer_datasets: usize,
    pub transfer_alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_batches: 50,
            datasets_per_batch: 50,
            reference_cohort_size: 2000,
            dataset_size: 1000,
            alpha_grid: (0..9).map(|i| 0.5 + 0.25 * i as f64).collect(),
            alpha_cap: 2.0,
            master_seed: 20_240_601,
            prevalence_range: [0.15, 0.35],
            age_mean_range: [50.0, 70.0],
            race_concentration: [6.0, 1.5, 1.5, 0.5, 0.5],
            cohort: CohortConfig::default(),
            forest: ForestConfig::default(),
            threshold: crate::metrics::DEFAULT_THRESHOLD,
            significance_level: 0.05,
            transfer_datasets: 101,
            transfer_alpha: 1.5,
        }
    }
}

impl RunConfig {
    /// The full 50 × 50 design.
    pub fn full_scale() -> Self {
        Self::default()
    }

    /// 10 batches × 10 datasets, 25 transfer datasets.
    pub fn desk_scale() -> Self {
        RunConfig {
            n_batches: 10,
            datasets_per_batch: 10,
            transfer_datasets: 25,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.n_batches < 2 {
            p.push(format!(
                "n_batches must be at least 2, got {}",
                self.n_batches
            ));
        }
        if self.datasets_per_batch < 1 {
            p.push("datasets_per_batch must be at least 1".to_string());
        }
        if self.reference_cohort_size < 4 {
            p.push(format!(
                "reference_cohort_size must be at least 4, got {}",
                self.reference_cohort_size
            ));
        }
        if self.dataset_size < 2 {
            p.push(format!(
                "dataset_size must be at least 2, got {}",
                self.dataset_size
            ));
        }
        if self.alpha_grid.is_empty() {
            p.push("alpha_grid must not be empty".to_string());
        }
        if self
            .alpha_grid
            .iter()
            .any(|a| !(a.is_finite() && *a >= 0.0))
        {
            p.push(format!(
                "alpha_grid values must be finite and >= 0, got {:?}",
                self.alpha_grid
            ));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            p.push(format!(
                "alpha_grid must be strictly increasing, got {:?}",
                self.alpha_grid
            ));
        }
        if let Some(&first) = self.alpha_grid.first() {
            if !(self.alpha_cap.is_finite() && self.alpha_cap >= first) {
                p.push(format!(
                    "alpha_cap ({}) must be at least the smallest grid value ({first})",
                    self.alpha_cap
                ));
            }
        }
        let [plo, phi] = self.prevalence_range;
        if !(0.0 < plo && plo <= phi && phi < 1.0) {
            p.push(format!(
                "prevalence_range must satisfy 0 < lo <= hi < 1, got [{plo}, {phi}]"
            ));
        }
        let [alo, ahi] = self.age_mean_range;
        if !(18.0 <= alo && alo <= ahi && ahi <= 90.0) {
            p.push(format!(
                "age_mean_range must satisfy 18 <= lo <= hi <= 90, got [{alo}, {ahi}]"
            ));
        }
        if self
            .race_concentration
            .iter()
            .any(|c| !(c.is_finite() && *c > 0.0))
        {
            p.push(format!(
                "race_concentration values must be positive, got {:?}",
                self.race_concentration
            ));
        }
        self.cohort.collect_violations("cohort.", &mut p);
        self.forest.collect_violations("forest.", &mut p);
        if self.forest.mtry > 2 {
            p.push(format!(
                "forest.mtry must be 1 or 2 for age and race, got {}",
                self.forest.mtry
            ));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            p.push(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            ));
        }
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            p.push(format!(
                "significance_level must be in (0, 1), got {}",
                self.significance_level
            ));
        }
        if self.transfer_datasets < 2 {
            p.push(format!(
                "transfer_datasets must be at least 2, got {}",
                self.transfer_datasets
            ));
        }
        if !(self.transfer_alpha.is_finite() && self.transfer_alpha >= 0.0) {
            p.push(format!(
                "transfer_alpha must be finite and >= 0, got {}",
                self.transfer_alpha
            ));
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Draw one dataset's population parameters and cohort seed.
    pub fn sample_cohort_config<R: Rng + ?Sized>(
        &self,
        n_patients: usize,
        rng: &mut R,
    ) -> Result<CohortConfig> {
        let [plo, phi] = self.prevalence_range;
        let [alo, ahi] = self.age_mean_range;
        let base_dementia_rate = plo + (phi - plo) * rng.random::<f64>();
        let age_mean = alo + (ahi - alo) * rng.random::<f64>();
        let race_probs = sample_race_mix(&self.race_concentration, rng)?;
        Ok(CohortConfig {
            n_patients,
            base_dementia_rate,
            age_mean,
            race_probs,
            seed: rng.random(),
            ..self.cohort.clone()
        })
    }
}
