use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use sfi_lab::calibration::{calibrate, estimate_optimal_alpha, CalibrationParams};
use sfi_lab::forest::{train, FeatureMatrix, ForestConfig};
use sfi_lab::metrics::{auc, metric_set};
use sfi_lab::sfi::cohort_sfi;
use sfi_lab::sim::{generate_cohort, CodeRegistry, CohortConfig};
use sfi_lab::stats::wilcoxon_signed_rank;

fn cohort(n: usize, seed: u64) -> sfi_lab::sim::Cohort {
    let cfg = CohortConfig {
        n_patients: n,
        seed,
        ..Default::default()
    };
    generate_cohort(&cfg, &CodeRegistry::default_dementia()).unwrap()
}

fn simulation(c: &mut Criterion) {
    let registry = CodeRegistry::default_dementia();
    let cfg = CohortConfig {
        n_patients: 1000,
        seed: 1,
        ..Default::default()
    };
    c.bench_function("generate_cohort_1000", |b| {
        b.iter(|| generate_cohort(black_box(&cfg), &registry).unwrap())
    });
    let patients = cohort(1000, 2).patients;
    c.bench_function("cohort_sfi_1000", |b| {
        b.iter(|| cohort_sfi(black_box(&patients)).unwrap())
    });
}

fn forest(c: &mut Criterion) {
    let patients = cohort(1000, 3).patients;
    let features = FeatureMatrix::demographics(&patients);
    let labels: Vec<bool> = patients.iter().map(|p| p.dementia_label).collect();
    let config = ForestConfig {
        n_trees: 100,
        ..Default::default()
    };
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("train_100_trees_1000_rows", |b| {
        b.iter(|| train(black_box(&features), &labels, &config).unwrap())
    });
    let model = train(&features, &labels, &config).unwrap();
    group.bench_function("predict_1000_rows", |b| {
        b.iter(|| model.predict_proba(black_box(&features)).unwrap())
    });
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let patients = cohort(1000, 4).patients;
    let labels: Vec<bool> = patients.iter().map(|p| p.dementia_label).collect();
    let sfi: Vec<f64> = cohort_sfi(&patients)
        .unwrap()
        .iter()
        .map(|s| s.composite)
        .collect();
    let raw: Vec<f64> = (0..labels.len())
        .map(|i| ((i * 7919) % 1000) as f64 / 1000.0)
        .collect();
    let reference = sfi.iter().sum::<f64>() / sfi.len() as f64;
    c.bench_function("auc_1000", |b| {
        b.iter(|| auc(black_box(&labels), &raw).unwrap())
    });
    c.bench_function("metric_set_1000", |b| {
        b.iter(|| metric_set(black_box(&labels), &raw, 0.5).unwrap())
    });
    c.bench_function("optimal_alpha_1000", |b| {
        b.iter(|| estimate_optimal_alpha(black_box(&labels), &raw, &sfi, reference).unwrap())
    });
    let params = CalibrationParams::new(1.5, reference).unwrap();
    c.bench_function("calibrate_1000", |b| {
        b.iter_batched(
            || raw.clone(),
            |raw| {
                raw.iter()
                    .zip(&sfi)
                    .map(|(&y, &s)| calibrate(y, s, &params).unwrap())
                    .sum::<f64>()
            },
            BatchSize::SmallInput,
        )
    });
    let x: Vec<f64> = raw.iter().take(100).copied().collect();
    let y: Vec<f64> = sfi.iter().take(100).copied().collect();
    c.bench_function("wilcoxon_100", |b| {
        b.iter(|| wilcoxon_signed_rank(black_box(&x), &y).unwrap())
    });
}

criterion_group!(benches, simulation, forest, scoring);
criterion_main!(benches);
