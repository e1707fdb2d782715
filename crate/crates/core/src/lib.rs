//! Simulation laboratory for diagnostic signal fidelity.
//!
//! The crate generates synthetic EHR dementia cohorts ([`sim`]), scores each
//! patient's diagnostic signal fidelity ([`sfi`]), trains a bagged tree
//! ensemble on demographics ([`forest`]), adjusts its probabilities with a
//! fidelity-aware multiplicative correction ([`calibration`]) and evaluates
//! the result with a batch experiment driver ([`experiment`]) backed by
//! classification metrics ([`metrics`]) and paired statistics ([`stats`]).

pub mod calibration;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod io;
pub mod metrics;
pub mod seed;
pub mod sfi;
pub mod sim;
pub mod stats;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use calibration::{
    calibrate, calibration_error_delta, estimate_optimal_alpha, CalibrationParams,
};
pub use error::{Error, Result};
pub use experiment::{BatchSummary, DistanceRow, RunConfig};
pub use forest::{ForestConfig, ForestModel};
pub use metrics::{Metric, MetricSet};
pub use sfi::{compute_sfi, SfiBreakdown};
pub use sim::{CodeRegistry, CohortConfig, Encounter, PatientRecord};
pub use stats::TestResult;
