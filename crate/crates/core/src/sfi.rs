//! Signal Fidelity Index.
//!
//! Six per-patient components, each in `[0, 1]`, and their arithmetic mean.
//! Components that would divide by zero return 1: a patient without dementia
//! coding offers no evidence of low-fidelity coding.
//!
//! All components are computed over the chronologically sorted encounter
//! sequence, so the storage order of `PatientRecord::encounters` never
//! matters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Encounter, FidelityClass, PatientRecord, Setting, Specialty};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfiBreakdown {
    pub specificity: f64,
    pub temporal_consistency: f64,
    pub entropy: f64,
    pub contextual_concordance: f64,
    pub medication_alignment: f64,
    pub trajectory_stability: f64,
    pub composite: f64,
}

impl SfiBreakdown {
    /// Assemble a breakdown; the composite is the mean of the six components.
    pub fn from_components(c: [f64; 6]) -> Self {
        SfiBreakdown {
            specificity: c[0],
            temporal_consistency: c[1],
            entropy: c[2],
            contextual_concordance: c[3],
            medication_alignment: c[4],
            trajectory_stability: c[5],
            composite: c.iter().sum::<f64>() / 6.0,
        }
    }

    pub fn components(&self) -> [f64; 6] {
        [
            self.specificity,
            self.temporal_consistency,
            self.entropy,
            self.contextual_concordance,
            self.medication_alignment,
            self.trajectory_stability,
        ]
    }
}

fn sorted(patient: &PatientRecord) -> Vec<&Encounter> {
    let mut v: Vec<&Encounter> = patient.encounters.iter().collect();
    v.sort();
    v
}

/// Share of the patient's dementia codes that are high-fidelity.
pub fn specificity(patient: &PatientRecord) -> f64 {
    let (high, total) = patient
        .encounters
        .iter()
        .filter(|e| e.is_dementia_coded())
        .fold((0usize, 0usize), |(h, t), e| {
            (
                h + usize::from(e.fidelity_class == FidelityClass::High),
                t + 1,
            )
        });
    if total == 0 {
        1.0
    } else {
        high as f64 / total as f64
    }
}

/// One minus the fraction of adjacent encounter pairs whose codes differ.
pub fn temporal_consistency(patient: &PatientRecord) -> f64 {
    let seq = sorted(patient);
    if seq.len() <= 1 {
        return 1.0;
    }
    let changes = seq.windows(2).filter(|w| w[0].code != w[1].code).count();
    1.0 - changes as f64 / (seq.len() - 1) as f64
}

/// One minus the Shannon entropy of the code distribution, normalised by
/// `log2 K` for `K` distinct codes.
pub fn entropy_component(patient: &PatientRecord) -> f64 {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &patient.encounters {
        *counts.entry(e.code.as_str()).or_default() += 1;
    }
    let n = patient.encounters.len();
    let k = counts.len();
    if n == 0 || k <= 1 {
        return 1.0;
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum();
    (1.0 - h / (k as f64).log2()).clamp(0.0, 1.0)
}

/// Share of encounters that carry a dementia code in an inpatient or
/// neurology context.
pub fn contextual_concordance(patient: &PatientRecord) -> Result<f64> {
    let n = patient.encounters.len();
    if n == 0 {
        return Err(Error::domain(
            "contextual concordance needs at least one encounter",
        ));
    }
    let hits = patient
        .encounters
        .iter()
        .filter(|e| {
            e.is_dementia_coded()
                && (e.setting == Setting::Inpatient || e.specialty == Specialty::Neurology)
        })
        .count();
    Ok(hits as f64 / n as f64)
}

/// Share of dementia-coded encounters that also carry a dementia medication.
pub fn medication_alignment(patient: &PatientRecord) -> f64 {
    let (aligned, total) = patient
        .encounters
        .iter()
        .filter(|e| e.is_dementia_coded())
        .fold((0usize, 0usize), |(a, t), e| {
            (a + usize::from(e.medication.is_some()), t + 1)
        });
    if total == 0 {
        1.0
    } else {
        aligned as f64 / total as f64
    }
}

/// Most frequent code among encounters in `setting`; ties go to the
/// lexicographically smallest code.
fn modal_code(patient: &PatientRecord, setting: Setting) -> Option<&str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in patient.encounters.iter().filter(|e| e.setting == setting) {
        *counts.entry(e.code.as_str()).or_default() += 1;
    }
    // BTreeMap iterates in ascending key order; keep the first maximum.
    counts
        .into_iter()
        .fold(None, |best: Option<(&str, usize)>, (code, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((code, c)),
        })
        .map(|(code, _)| code)
}

/// 1 when the modal inpatient code equals the modal outpatient code.
pub fn trajectory_stability(patient: &PatientRecord) -> f64 {
    match (
        modal_code(patient, Setting::Inpatient),
        modal_code(patient, Setting::Outpatient),
    ) {
        (Some(a), Some(b)) if a != b => 0.0,
        _ => 1.0,
    }
}

pub fn compute_sfi(patient: &PatientRecord) -> Result<SfiBreakdown> {
    Ok(SfiBreakdown::from_components([
        specificity(patient),
        temporal_consistency(patient),
        entropy_component(patient),
        contextual_concordance(patient)?,
        medication_alignment(patient),
        trajectory_stability(patient),
    ]))
}

pub fn cohort_sfi(patients: &[PatientRecord]) -> Result<Vec<SfiBreakdown>> {
    patients.iter().map(compute_sfi).collect()
}

/// Mean composite SFI of a cohort.
pub fn cohort_mean_sfi(patients: &[PatientRecord]) -> Result<f64> {
    mean_composite(&cohort_sfi(patients)?)
}

pub fn mean_composite(breakdowns: &[SfiBreakdown]) -> Result<f64> {
    if breakdowns.is_empty() {
        return Err(Error::domain("mean SFI of an empty cohort"));
    }
    Ok(breakdowns.iter().map(|s| s.composite).sum::<f64>() / breakdowns.len() as f64)
}
