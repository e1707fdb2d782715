//! Synthetic dementia cohort generator.
//!
//! A cohort is a set of patients with integer ages, a race/ethnicity category,
//! a dementia label drawn from a multiplicative age × race risk model, and a
//! chronologically ordered list of encounters. Each encounter carries one
//! ICD-10 code, a care setting, a specialty and (for dementia-coded
//! encounters) an optional dementia medication.
//!
//! Generation is a pure function of the [`CohortConfig`] (including its seed)
//! and the [`CodeRegistry`].

mod registry;
pub mod sampling;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

pub use registry::{CodeRegistry, FidelityClass, RegistryEntry};

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 90;

/// Race/ethnicity categories, in the order used by every 5-vector in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    White,
    Black,
    Hispanic,
    Asian,
    Other,
}

impl Race {
    pub const ALL: [Race; 5] = [
        Race::White,
        Race::Black,
        Race::Hispanic,
        Race::Asian,
        Race::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Race> {
        Self::ALL.get(i).copied()
    }

    /// Relative dementia risk against the White reference group.
    pub fn risk_multiplier(self) -> f64 {
        match self {
            Race::White => 1.0,
            Race::Black => 1.5,
            Race::Hispanic => 1.3,
            Race::Asian => 1.1,
            Race::Other => 1.2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "white",
            Race::Black => "black",
            Race::Hispanic => "hispanic",
            Race::Asian => "asian",
            Race::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Inpatient,
    Outpatient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Specialty {
    Neurology,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medication {
    Donepezil,
    Memantine,
    Rivastigmine,
    Galantamine,
}

impl Medication {
    pub const ALL: [Medication; 4] = [
        Medication::Donepezil,
        Medication::Memantine,
        Medication::Rivastigmine,
        Medication::Galantamine,
    ];
}

/// Per-patient medication category probabilities, in [`Medication::ALL`]
/// order followed by "none".
pub const MEDICATION_PROBS_DEMENTIA: [f64; 5] = [0.30, 0.30, 0.20, 0.10, 0.10];
pub const MEDICATION_PROBS_OTHER: [f64; 5] = [0.01, 0.01, 0.005, 0.005, 0.97];

pub const INPATIENT_RATE_DEMENTIA: f64 = 0.40;
pub const INPATIENT_RATE_OTHER: f64 = 0.25;

/// Weight of a high-fidelity code relative to a low-fidelity code when
/// coding a labeled patient.
pub const HIGH_FIDELITY_WEIGHT: f64 = 2.0;

/// A single clinical encounter.
///
/// Field order matters: the derived `Ord` sorts by date first, and the
/// remaining fields make the order total so that the chronological sequence
/// of a patient is independent of storage order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Encounter {
    pub date: NaiveDate,
    pub code: String,
    pub fidelity_class: FidelityClass,
    pub setting: Setting,
    pub specialty: Specialty,
    pub medication: Option<Medication>,
}

impl Encounter {
    /// Placeholder produced by [`generate_encounters`] before coding.
    pub fn skeleton(date: NaiveDate) -> Self {
        Encounter {
            date,
            code: String::new(),
            fidelity_class: FidelityClass::NonDementia,
            setting: Setting::Outpatient,
            specialty: Specialty::Other,
            medication: None,
        }
    }

    pub fn is_dementia_coded(&self) -> bool {
        self.fidelity_class.is_dementia()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub age: u32,
    pub race: Race,
    pub dementia_label: bool,
    pub encounters: Vec<Encounter>,
}

/// Dataset-level probabilities that an unlabeled patient's encounter is
/// coded with a low- or high-fidelity dementia code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingRates {
    pub low: f64,
    pub high: f64,
}

impl CodingRates {
    /// Draw the attenuation factors once for a dataset and scale them by the
    /// configured base code rate.
    pub fn sample<R: Rng + ?Sized>(config: &CohortConfig, rng: &mut R) -> Self {
        let [llo, lhi] = config.low_code_factor_range;
        let [hlo, hhi] = config.high_code_factor_range;
        let low = uniform_in(llo, lhi, rng);
        let high = uniform_in(hlo, hhi, rng);
        CodingRates {
            low: low * config.base_code_rate,
            high: high * config.base_code_rate,
        }
    }
}

fn uniform_in<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub age_mean: f64,
    pub age_sd: f64,
    /// White, Black, Hispanic, Asian, Other.
    pub race_probs: [f64; 5],
    pub base_dementia_rate: f64,
    pub window_start: NaiveDate,
    /// Exclusive upper bound of encounter dates.
    pub window_end: NaiveDate,
    pub encounters_min: u32,
    pub encounters_max: u32,
    pub seed: u64,
    pub neurology_rate_dementia: f64,
    pub neurology_rate_other: f64,
    pub base_code_rate: f64,
    pub low_code_factor_range: [f64; 2],
    pub high_code_factor_range: [f64; 2],
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_patients: 1000,
            age_mean: 60.0,
            age_sd: 10.0,
            race_probs: [0.6, 0.15, 0.15, 0.05, 0.05],
            base_dementia_rate: 0.25,
            window_start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            window_end: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
            encounters_min: 2,
            encounters_max: 20,
            seed: 0,
            neurology_rate_dementia: 0.20,
            neurology_rate_other: 0.05,
            base_code_rate: 1.0,
            low_code_factor_range: [0.10, 0.30],
            high_code_factor_range: [0.01, 0.05],
        }
    }
}

fn check_probability(name: &str, p: f64, problems: &mut Vec<String>) {
    if !(0.0..=1.0).contains(&p) {
        problems.push(format!("{name} must be in [0, 1], got {p}"));
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2], problems: &mut Vec<String>) {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        problems.push(format!(
            "{name} must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
        ));
    }
}

impl CohortConfig {
    /// Check every constraint and report all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        self.collect_violations("", &mut p);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Push one message per violated field, each prefixed with `prefix`.
    pub fn collect_violations(&self, prefix: &str, out: &mut Vec<String>) {
        let mut p = Vec::new();
        if self.n_patients == 0 {
            p.push("n_patients must be positive".to_string());
        }
        if !(MIN_AGE as f64..=MAX_AGE as f64).contains(&self.age_mean) {
            p.push(format!(
                "age_mean must be in [18, 90], got {}",
                self.age_mean
            ));
        }
        if !(5.0..=20.0).contains(&self.age_sd) {
            p.push(format!("age_sd must be in [5, 20], got {}", self.age_sd));
        }
        if self.race_probs.iter().any(|&x| !(0.0..=1.0).contains(&x))
            || (self.race_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            p.push(format!(
                "race_probs must be non-negative and sum to 1 (±1e-9), got {:?}",
                self.race_probs
            ));
        }
        if !(self.base_dementia_rate > 0.0 && self.base_dementia_rate < 1.0) {
            p.push(format!(
                "base_dementia_rate must be in (0, 1), got {}",
                self.base_dementia_rate
            ));
        }
        if self.window_start >= self.window_end {
            p.push(format!(
                "window_start ({}) must precede window_end ({})",
                self.window_start, self.window_end
            ));
        }
        if self.encounters_min < 1 {
            p.push("encounters_min must be at least 1".to_string());
        }
        if self.encounters_max < self.encounters_min {
            p.push(format!(
                "encounters_max ({}) must be >= encounters_min ({})",
                self.encounters_max, self.encounters_min
            ));
        }
        check_probability(
            "neurology_rate_dementia",
            self.neurology_rate_dementia,
            &mut p,
        );
        check_probability("neurology_rate_other", self.neurology_rate_other, &mut p);
        if !(self.base_code_rate >= 0.0 && self.base_code_rate.is_finite()) {
            p.push(format!(
                "base_code_rate must be non-negative, got {}",
                self.base_code_rate
            ));
        }
        check_range("low_code_factor_range", self.low_code_factor_range, &mut p);
        check_range(
            "high_code_factor_range",
            self.high_code_factor_range,
            &mut p,
        );
        let low_max = self.low_code_factor_range[1] * self.base_code_rate;
        let high_max = self.high_code_factor_range[1] * self.base_code_rate;
        if low_max + high_max > 1.0 {
            p.push(format!(
                "base_code_rate × (low + high factor) must not exceed 1, got {}",
                low_max + high_max
            ));
        }
        out.extend(p.into_iter().map(|m| format!("{prefix}{m}")));
    }
}

/// Individual dementia risk: `base_rate × age_effect × race_multiplier`,
/// clipped to 1. The age effect is 0.5 below 65 and `2^((age − 65)/5)` from
/// 65 on.
pub fn dementia_probability(age: f64, race: Race, base_rate: f64) -> Result<f64> {
    if !(MIN_AGE as f64..=MAX_AGE as f64).contains(&age) {
        return Err(Error::domain(format!("age {age} outside [18, 90]")));
    }
    if !(base_rate > 0.0 && base_rate < 1.0) {
        return Err(Error::domain(format!(
            "base rate {base_rate} outside (0, 1)"
        )));
    }
    let age_effect = if age < 65.0 {
        0.5
    } else {
        ((age - 65.0) / 5.0).exp2()
    };
    Ok((base_rate * age_effect * race.risk_multiplier()).min(1.0))
}

/// Draw a dataset-level race mix from a Dirichlet prior.
pub fn sample_race_mix<R: Rng + ?Sized>(concentration: &[f64; 5], rng: &mut R) -> Result<[f64; 5]> {
    sampling::dirichlet(concentration, rng)
}

/// Integer age from the truncated normal and a race category.
pub fn sample_demographics<R: Rng + ?Sized>(config: &CohortConfig, rng: &mut R) -> (u32, Race) {
    let age = sampling::truncated_normal(
        config.age_mean,
        config.age_sd,
        MIN_AGE as f64,
        MAX_AGE as f64,
        rng,
    )
    .round() as u32;
    let race = Race::from_index(sampling::categorical(&config.race_probs, rng))
        .expect("five race probabilities");
    (age, race)
}

/// Encounter skeletons: a uniform count in `[encounters_min, encounters_max]`
/// with dates uniform over `[window_start, window_end)`, sorted ascending.
pub fn generate_encounters<R: Rng + ?Sized>(config: &CohortConfig, rng: &mut R) -> Vec<Encounter> {
    let n = rng.random_range(config.encounters_min..=config.encounters_max);
    let span = (config.window_end - config.window_start).num_days();
    let mut dates: Vec<NaiveDate> = (0..n)
        .map(|_| config.window_start + chrono::Duration::days(rng.random_range(0..span)))
        .collect();
    dates.sort_unstable();
    dates.into_iter().map(Encounter::skeleton).collect()
}

fn pick<'a, R: Rng + ?Sized>(codes: &'a [String], rng: &mut R) -> &'a str {
    &codes[rng.random_range(0..codes.len())]
}

/// Give every encounter exactly one code.
///
/// Labeled patients get a dementia code on every encounter, with each
/// high-fidelity code weighted twice as heavily as each low-fidelity code.
/// Unlabeled patients get a low-fidelity code with probability
/// `rates.low`, a high-fidelity code with probability `rates.high`, and a
/// filler code otherwise.
pub fn assign_codes<R: Rng + ?Sized>(
    encounters: &mut [Encounter],
    dementia_label: bool,
    registry: &CodeRegistry,
    rates: CodingRates,
    rng: &mut R,
) {
    let (high, low, filler) = (registry.high(), registry.low(), registry.filler());
    let high_share = HIGH_FIDELITY_WEIGHT * high.len() as f64
        / (HIGH_FIDELITY_WEIGHT * high.len() as f64 + low.len() as f64);
    for enc in encounters {
        let u: f64 = rng.random();
        let (code, class) = if dementia_label {
            if u < high_share {
                (pick(high, rng), FidelityClass::High)
            } else {
                (pick(low, rng), FidelityClass::Low)
            }
        } else if u < rates.low {
            (pick(low, rng), FidelityClass::Low)
        } else if u < rates.low + rates.high {
            (pick(high, rng), FidelityClass::High)
        } else {
            (pick(filler, rng), FidelityClass::NonDementia)
        };
        enc.code = code.to_string();
        enc.fidelity_class = class;
    }
}

/// Draw the patient's medication category and stamp it on every
/// dementia-coded encounter. Returns the drawn category.
pub fn assign_medications<R: Rng + ?Sized>(
    encounters: &mut [Encounter],
    dementia_label: bool,
    rng: &mut R,
) -> Option<Medication> {
    let probs = if dementia_label {
        &MEDICATION_PROBS_DEMENTIA
    } else {
        &MEDICATION_PROBS_OTHER
    };
    let med = Medication::ALL
        .get(sampling::categorical(probs, rng))
        .copied();
    for enc in encounters.iter_mut().filter(|e| e.is_dementia_coded()) {
        enc.medication = med;
    }
    med
}

pub fn assign_settings<R: Rng + ?Sized>(
    encounters: &mut [Encounter],
    dementia_label: bool,
    config: &CohortConfig,
    rng: &mut R,
) {
    let (inpatient, neurology) = if dementia_label {
        (INPATIENT_RATE_DEMENTIA, config.neurology_rate_dementia)
    } else {
        (INPATIENT_RATE_OTHER, config.neurology_rate_other)
    };
    for enc in encounters {
        enc.setting = if rng.random::<f64>() < inpatient {
            Setting::Inpatient
        } else {
            Setting::Outpatient
        };
        enc.specialty = if rng.random::<f64>() < neurology {
            Specialty::Neurology
        } else {
            Specialty::Other
        };
    }
}

/// A generated dataset together with its dataset-level coding rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub coding_rates: CodingRates,
    pub patients: Vec<PatientRecord>,
}

fn generate_patient(
    index: usize,
    config: &CohortConfig,
    registry: &CodeRegistry,
    rates: CodingRates,
    rng: &mut SimRng,
) -> PatientRecord {
    let (age, race) = sample_demographics(config, rng);
    let p = dementia_probability(age as f64, race, config.base_dementia_rate)
        .expect("validated config yields in-domain risk inputs");
    let label = rng.random::<f64>() < p;
    let mut encounters = generate_encounters(config, rng);
    assign_codes(&mut encounters, label, registry, rates, rng);
    assign_medications(&mut encounters, label, rng);
    assign_settings(&mut encounters, label, config, rng);
    PatientRecord {
        id: format!("P{index:06}"),
        age,
        race,
        dementia_label: label,
        encounters,
    }
}

/// Generate `config.n_patients` patients from `config.seed`.
pub fn generate_cohort(config: &CohortConfig, registry: &CodeRegistry) -> Result<Cohort> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let coding_rates = CodingRates::sample(config, &mut rng);
    let patients = (0..config.n_patients)
        .map(|i| generate_patient(i, config, registry, coding_rates, &mut rng))
        .collect();
    Ok(Cohort {
        coding_rates,
        patients,
    })
}
