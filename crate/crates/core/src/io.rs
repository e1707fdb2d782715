//! CSV and JSON artifacts.
//!
//! Every CSV uses RFC 4180 quoting, `.` as decimal separator, UTF-8 and LF
//! line endings. Undefined values are written as empty fields. Floats use
//! the shortest representation that round-trips, so artifacts are
//! byte-identical across runs with the same inputs.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{AlphaSweepRow, BatchResult, DistanceRow};
use crate::metrics::{Metric, MetricSet};
use crate::sfi::SfiBreakdown;
use crate::sim::{
    CodeRegistry, Encounter, FidelityClass, Medication, PatientRecord, Race, RegistryEntry,
    Setting, Specialty,
};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EncounterRow {
    patient_id: String,
    age: u32,
    race: Race,
    dementia_label: bool,
    date: NaiveDate,
    code: String,
    fidelity_class: FidelityClass,
    setting: Setting,
    specialty: Specialty,
    medication: Option<Medication>,
}

/// One row per encounter, patients in input order.
pub fn write_cohort_csv<W: Write>(w: W, patients: &[PatientRecord]) -> Result<()> {
    write_rows(
        w,
        patients.iter().flat_map(|p| {
            p.encounters.iter().map(move |e| EncounterRow {
                patient_id: p.id.clone(),
                age: p.age,
                race: p.race,
                dementia_label: p.dementia_label,
                date: e.date,
                code: e.code.clone(),
                fidelity_class: e.fidelity_class,
                setting: e.setting,
                specialty: e.specialty,
                medication: e.medication,
            })
        }),
    )
}

/// Inverse of [`write_cohort_csv`]. Patients keep first-appearance order;
/// demographics must agree across a patient's rows.
pub fn read_cohort_csv<R: Read>(r: R) -> Result<Vec<PatientRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut patients: Vec<PatientRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in reader.deserialize() {
        let row: EncounterRow = row?;
        let encounter = Encounter {
            date: row.date,
            code: row.code,
            fidelity_class: row.fidelity_class,
            setting: row.setting,
            specialty: row.specialty,
            medication: row.medication,
        };
        match index.get(&row.patient_id) {
            Some(&i) => {
                let p = &mut patients[i];
                if (p.age, p.race, p.dementia_label) != (row.age, row.race, row.dementia_label) {
                    return Err(Error::domain(format!(
                        "patient {} has inconsistent demographics across rows",
                        row.patient_id
                    )));
                }
                p.encounters.push(encounter);
            }
            None => {
                index.insert(row.patient_id.clone(), patients.len());
                patients.push(PatientRecord {
                    id: row.patient_id,
                    age: row.age,
                    race: row.race,
                    dementia_label: row.dementia_label,
                    encounters: vec![encounter],
                });
            }
        }
    }
    Ok(patients)
}

pub fn write_registry_csv<W: Write>(w: W, registry: &CodeRegistry) -> Result<()> {
    write_rows(w, registry.entries())
}

pub fn read_registry_csv<R: Read>(r: R) -> Result<CodeRegistry> {
    let entries = csv::Reader::from_reader(r)
        .deserialize::<RegistryEntry>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    CodeRegistry::new(entries)
}

#[derive(Serialize)]
struct SfiRow<'a> {
    patient_id: &'a str,
    specificity: f64,
    temporal_consistency: f64,
    entropy: f64,
    contextual_concordance: f64,
    medication_alignment: f64,
    trajectory_stability: f64,
    composite: f64,
}

pub fn write_sfi_csv<W: Write>(
    w: W,
    patients: &[PatientRecord],
    sfi: &[SfiBreakdown],
) -> Result<()> {
    if patients.len() != sfi.len() {
        return Err(Error::domain("one SFI breakdown per patient expected"));
    }
    write_rows(
        w,
        patients.iter().zip(sfi).map(|(p, s)| SfiRow {
            patient_id: &p.id,
            specificity: s.specificity,
            temporal_consistency: s.temporal_consistency,
            entropy: s.entropy,
            contextual_concordance: s.contextual_concordance,
            medication_alignment: s.medication_alignment,
            trajectory_stability: s.trajectory_stability,
            composite: s.composite,
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub patient_id: String,
    pub y_raw: f64,
    pub sfi: f64,
    pub y_calibrated: f64,
    pub alpha: f64,
    pub ref_mean_sfi: f64,
}

pub fn write_calibration_csv<W: Write>(w: W, rows: &[CalibrationRow]) -> Result<()> {
    write_rows(w, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    Raw,
    Calibrated,
    Reference,
}

/// One long-format metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub batch: usize,
    pub dataset: Option<usize>,
    pub source: MetricSource,
    pub alpha: Option<f64>,
    pub metric: Metric,
    pub value: Option<f64>,
}

/// The seven metric rows of one metric set.
pub fn metric_rows(
    batch: usize,
    dataset: Option<usize>,
    source: MetricSource,
    alpha: Option<f64>,
    set: &MetricSet,
) -> impl Iterator<Item = MetricRow> + '_ {
    Metric::ALL.into_iter().map(move |metric| MetricRow {
        batch,
        dataset,
        source,
        alpha,
        metric,
        value: set.get(metric),
    })
}

/// Long-format rows for a set of batches: the reference metrics of each
/// batch (no dataset, no α), then per dataset the raw metrics followed by
/// the calibrated metrics at every α.
pub fn batch_metric_rows(batches: &[BatchResult]) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for b in batches {
        rows.extend(metric_rows(
            b.batch,
            None,
            MetricSource::Reference,
            None,
            &b.reference,
        ));
        for d in &b.datasets {
            rows.extend(metric_rows(
                b.batch,
                Some(d.dataset),
                MetricSource::Raw,
                None,
                &d.raw,
            ));
            for (alpha, set) in b.alphas.iter().zip(&d.calibrated) {
                rows.extend(metric_rows(
                    b.batch,
                    Some(d.dataset),
                    MetricSource::Calibrated,
                    Some(*alpha),
                    set,
                ));
            }
        }
    }
    rows
}

pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[AlphaSweepRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn write_distance_csv<W: Write>(w: W, rows: &[DistanceRow]) -> Result<()> {
    write_rows(w, rows)
}
