use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use sfi_lab::calibration::{
    calibrate_all, calibration_error_delta, estimate_optimal_alpha, CalibrationParams,
};
use sfi_lab::experiment::{
    alpha_sweep, dataset_cohort, distance_analysis, phase1_select_alpha, phase2_analysis,
    run_batches, run_reference, summarize, transfer_eval, BatchResult, BatchSummary,
    Phase1Selection, TRANSFER_BATCH,
};
use sfi_lab::forest::FeatureMatrix;
use sfi_lab::io::{self, CalibrationRow, MetricRow, MetricSource};
use sfi_lab::metrics::{metric_set, MetricSet};
use sfi_lab::seed::{stream_seed, Stream};
use sfi_lab::sfi::{cohort_sfi, mean_composite};
use sfi_lab::sim::{generate_cohort, CodeRegistry, CodingRates, CohortConfig};
use sfi_lab::{Error, RunConfig};

use crate::{Cli, Command, Failure};

/// Output directory for one invocation. Names that already exist get a
/// numeric suffix rather than being reused.
fn create_run_dir(root: &Path, subcommand: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{stamp}-{subcommand}");
    let mut candidate = root.join(&base);
    let mut k = 1;
    loop {
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                candidate = root.join(format!("{base}-{k}"));
                k += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> sfi_lab::Result<()>,
    ) -> Result<(), Failure> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        self.write(name, |w| io::write_json(w, value))
    }
}

#[derive(Serialize)]
struct BatchSeeds {
    batch: usize,
    reference_cohort: u64,
    reference_split: u64,
    forest: u64,
}

#[derive(Serialize)]
struct Seeds {
    master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cohort_seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    batches: Vec<BatchSeeds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transfer_forest: Option<u64>,
}

#[derive(Serialize)]
struct Versions {
    sfi_lab: &'static str,
    cli: &'static str,
}

/// No timestamps or thread counts: the manifest is part of the
/// byte-identical artifact set.
#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    versions: Versions,
    seeds: Seeds,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    config: &'a RunConfig,
    artifacts: Vec<String>,
}

fn batch_seeds(run: &RunConfig, n: usize) -> Vec<BatchSeeds> {
    (0..n)
        .map(|b| BatchSeeds {
            batch: b,
            reference_cohort: stream_seed(run.master_seed, b as u64, Stream::ReferenceCohort),
            reference_split: stream_seed(run.master_seed, b as u64, Stream::ReferenceSplit),
            forest: stream_seed(run.master_seed, b as u64, Stream::Forest),
        })
        .collect()
}

fn seeds(run: &RunConfig) -> Seeds {
    Seeds {
        master_seed: run.master_seed,
        cohort_seed: None,
        batches: Vec::new(),
        transfer_forest: None,
    }
}

#[derive(Serialize)]
struct CohortManifest<'a> {
    seed: u64,
    n_patients: usize,
    n_encounters: usize,
    coding_rates: CodingRates,
    config: &'a CohortConfig,
}

#[derive(Serialize)]
struct SfiSummary {
    n_patients: usize,
    mean_composite: f64,
}

#[derive(Serialize)]
struct CalibrationSummary {
    alpha: f64,
    ref_mean_sfi: f64,
    /// Closed-form least-squares α on this dataset; absent when unidentified.
    optimal_alpha: Option<f64>,
    delta_error: f64,
    raw: MetricSet,
    calibrated: MetricSet,
}

#[derive(Serialize)]
struct Phase1Report<'a> {
    significance_level: f64,
    alpha_cap: f64,
    alpha_grid: &'a [f64],
    selection: &'a Phase1Selection,
}

struct Sweep {
    batches: Vec<BatchResult>,
    summaries: Vec<BatchSummary>,
}

fn sweep(run: &RunConfig, alphas: &[f64], registry: &CodeRegistry) -> sfi_lab::Result<Sweep> {
    let batches = run_batches(run, alphas, registry)?;
    let summaries = batches.iter().map(summarize).collect();
    Ok(Sweep { batches, summaries })
}

/// Batch summaries that include `alpha`, re-running the batches on `[alpha]`
/// if the sweep did not cover it. Raw and reference values are identical
/// across both runs because every stream is keyed by its coordinates.
fn summaries_at(
    run: &RunConfig,
    grid: &Sweep,
    alpha: f64,
    registry: &CodeRegistry,
) -> sfi_lab::Result<Option<Sweep>> {
    if grid
        .summaries
        .first()
        .is_some_and(|s| s.alphas.contains(&alpha))
    {
        Ok(None)
    } else {
        sweep(run, &[alpha], registry).map(Some)
    }
}

pub fn execute(cli: &Cli, run: &RunConfig) -> Result<PathBuf, Failure> {
    let registry = CodeRegistry::default_dementia();
    let name = cli.command.name();
    let dir = create_run_dir(&cli.out, name)?;
    let mut out = Artifacts {
        dir: dir.clone(),
        written: Vec::new(),
    };
    let mut seeds = seeds(run);
    let mut alpha = None;

    match &cli.command {
        Command::Simulate => {
            let cohort = generate_cohort(&run.cohort, &registry)?;
            out.write("cohort.csv", |w| io::write_cohort_csv(w, &cohort.patients))?;
            out.write("registry.csv", |w| io::write_registry_csv(w, &registry))?;
            out.json(
                "cohort-manifest.json",
                &CohortManifest {
                    seed: run.cohort.seed,
                    n_patients: cohort.patients.len(),
                    n_encounters: cohort.patients.iter().map(|p| p.encounters.len()).sum(),
                    coding_rates: cohort.coding_rates,
                    config: &run.cohort,
                },
            )?;
            seeds.cohort_seed = Some(run.cohort.seed);
        }
        Command::Sfi { input } => {
            let patients = match input {
                Some(path) => io::read_cohort_csv(File::open(path)?)?,
                None => {
                    seeds.cohort_seed = Some(run.cohort.seed);
                    generate_cohort(&run.cohort, &registry)?.patients
                }
            };
            let sfi = cohort_sfi(&patients)?;
            out.write("sfi.csv", |w| io::write_sfi_csv(w, &patients, &sfi))?;
            out.json(
                "sfi-summary.json",
                &SfiSummary {
                    n_patients: patients.len(),
                    mean_composite: mean_composite(&sfi)?,
                },
            )?;
        }
        Command::Train => {
            let reference = run_reference(run, 0, &registry)?;
            out.json("model.json", &reference.model)?;
            let rows: Vec<MetricRow> =
                io::metric_rows(0, None, MetricSource::Reference, None, &reference.metrics)
                    .collect();
            out.write("metrics.csv", |w| io::write_metrics_csv(w, &rows))?;
            seeds.batches = batch_seeds(run, 1);
        }
        Command::Calibrate => {
            let a = run.transfer_alpha;
            alpha = Some(a);
            let reference = run_reference(run, 0, &registry)?;
            let patients = dataset_cohort(run, 0, 0, &registry)?.patients;
            let labels: Vec<bool> = patients.iter().map(|p| p.dementia_label).collect();
            let raw = reference
                .model
                .predict_proba(&FeatureMatrix::demographics(&patients))?;
            let sfi: Vec<f64> = cohort_sfi(&patients)?.iter().map(|s| s.composite).collect();
            let params = CalibrationParams::new(a, reference.ref_mean_sfi)?;
            let cal = calibrate_all(&raw, &sfi, &params)?;
            let rows: Vec<CalibrationRow> = patients
                .iter()
                .enumerate()
                .map(|(i, p)| CalibrationRow {
                    patient_id: p.id.clone(),
                    y_raw: raw[i],
                    sfi: sfi[i],
                    y_calibrated: cal[i],
                    alpha: a,
                    ref_mean_sfi: reference.ref_mean_sfi,
                })
                .collect();
            out.write("calibration.csv", |w| io::write_calibration_csv(w, &rows))?;
            let raw_set = metric_set(&labels, &raw, run.threshold)?;
            let cal_set = metric_set(&labels, &cal, run.threshold)?;
            let mut mrows: Vec<MetricRow> =
                io::metric_rows(0, None, MetricSource::Reference, None, &reference.metrics)
                    .collect();
            mrows.extend(io::metric_rows(
                0,
                Some(0),
                MetricSource::Raw,
                None,
                &raw_set,
            ));
            mrows.extend(io::metric_rows(
                0,
                Some(0),
                MetricSource::Calibrated,
                Some(a),
                &cal_set,
            ));
            out.write("metrics.csv", |w| io::write_metrics_csv(w, &mrows))?;
            let optimal_alpha =
                match estimate_optimal_alpha(&labels, &raw, &sfi, reference.ref_mean_sfi) {
                    Ok(v) => Some(v),
                    Err(Error::Degenerate(_)) => None,
                    Err(e) => return Err(e.into()),
                };
            out.json(
                "calibration-summary.json",
                &CalibrationSummary {
                    alpha: a,
                    ref_mean_sfi: reference.ref_mean_sfi,
                    optimal_alpha,
                    delta_error: calibration_error_delta(&labels, &raw, &cal)?,
                    raw: raw_set,
                    calibrated: cal_set,
                },
            )?;
            seeds.batches = batch_seeds(run, 1);
        }
        Command::Phase1 => {
            let grid = sweep(run, &run.alpha_grid, &registry)?;
            let selection = phase1(run, &grid, &mut out)?;
            alpha = Some(selection.recommended);
            write_metrics(&mut out, &grid, None)?;
            seeds.batches = batch_seeds(run, run.n_batches);
        }
        Command::Phase2 | Command::FullRun => {
            let full = matches!(cli.command, Command::FullRun);
            let (grid, a) = match (cli.alpha, full) {
                (Some(a), false) => (sweep(run, &[a], &registry)?, a),
                (given, _) => {
                    let grid = sweep(run, &run.alpha_grid, &registry)?;
                    let selection = phase1(run, &grid, &mut out)?;
                    (grid, given.unwrap_or(selection.recommended))
                }
            };
            alpha = Some(a);
            let extra = summaries_at(run, &grid, a, &registry)?;
            let at = extra.as_ref().unwrap_or(&grid);
            let report = phase2_analysis(&at.summaries, a)?;
            out.json("phase2.json", &report)?;
            let distance = distance_analysis(&at.summaries, a)?;
            out.write("distance.csv", |w| io::write_distance_csv(w, &distance))?;
            write_metrics(&mut out, &grid, extra.as_ref())?;
            seeds.batches = batch_seeds(run, run.n_batches);
            if full {
                let transfer = transfer_eval(run, &registry)?;
                out.json("transfer.json", &transfer)?;
                seeds.transfer_forest = Some(transfer_forest_seed(run));
            }
        }
        Command::Transfer => {
            alpha = Some(run.transfer_alpha);
            let transfer = transfer_eval(run, &registry)?;
            out.json("transfer.json", &transfer)?;
            seeds.transfer_forest = Some(transfer_forest_seed(run));
        }
    }

    let mut artifacts = out.written.clone();
    artifacts.push("run-manifest.json".to_string());
    let manifest = RunManifest {
        subcommand: name,
        versions: Versions {
            sfi_lab: sfi_lab::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        seeds,
        alpha,
        config: run,
        artifacts,
    };
    out.json("run-manifest.json", &manifest)?;
    Ok(dir)
}

fn transfer_forest_seed(run: &RunConfig) -> u64 {
    stream_seed(run.master_seed, TRANSFER_BATCH, Stream::TransferForest)
}

fn phase1(run: &RunConfig, grid: &Sweep, out: &mut Artifacts) -> Result<Phase1Selection, Failure> {
    let rows = alpha_sweep(&grid.summaries, run.significance_level)?;
    out.write("sweep.csv", |w| io::write_sweep_csv(w, &rows))?;
    let selection = phase1_select_alpha(&rows, run.alpha_cap, run.significance_level)?;
    out.json(
        "phase1.json",
        &Phase1Report {
            significance_level: run.significance_level,
            alpha_cap: run.alpha_cap,
            alpha_grid: &grid.summaries[0].alphas,
            selection: &selection,
        },
    )?;
    Ok(selection)
}

fn write_metrics(out: &mut Artifacts, grid: &Sweep, extra: Option<&Sweep>) -> Result<(), Failure> {
    let mut rows = io::batch_metric_rows(&grid.batches);
    if let Some(extra) = extra {
        // raw and reference rows are already present
        rows.extend(
            io::batch_metric_rows(&extra.batches)
                .into_iter()
                .filter(|r| r.source == MetricSource::Calibrated),
        );
    }
    out.write("metrics.csv", |w| io::write_metrics_csv(w, &rows))
}
