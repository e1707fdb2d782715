//! Fidelity-aware multiplicative probability calibration.
//!
//! A raw probability is scaled by `1 + α·r`, where `r = (SFI − S̄)/S̄` is the
//! patient's relative fidelity deviation from the reference cohort mean `S̄`.
//! No outcome labels are needed to apply it; labels are only used to
//! estimate the least-squares `α*` and to measure the change in squared
//! error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub alpha: f64,
    pub ref_mean_sfi: f64,
}

impl CalibrationParams {
    pub fn new(alpha: f64, ref_mean_sfi: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::domain(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        check_reference(ref_mean_sfi)?;
        Ok(CalibrationParams {
            alpha,
            ref_mean_sfi,
        })
    }
}

fn check_reference(ref_mean_sfi: f64) -> Result<()> {
    if ref_mean_sfi > 0.0 && ref_mean_sfi <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "reference mean SFI must be in (0, 1], got {ref_mean_sfi}"
        )))
    }
}

/// Relative fidelity deviation `(sfi − ref)/ref`.
#[inline]
pub fn relative_fidelity(sfi: f64, ref_mean_sfi: f64) -> f64 {
    (sfi - ref_mean_sfi) / ref_mean_sfi
}

/// `y_raw · (1 + α·r)` without clipping. `alpha` may be negative here.
#[inline]
pub fn calibrate_unclipped(y_raw: f64, sfi: f64, alpha: f64, ref_mean_sfi: f64) -> f64 {
    y_raw * (1.0 + alpha * relative_fidelity(sfi, ref_mean_sfi))
}

/// Calibrated probability, clipped into `[0, 1]`.
pub fn calibrate(y_raw: f64, sfi: f64, params: &CalibrationParams) -> Result<f64> {
    check_reference(params.ref_mean_sfi)?;
    if !(0.0..=1.0).contains(&y_raw) {
        return Err(Error::domain(format!(
            "raw probability {y_raw} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&sfi) {
        return Err(Error::domain(format!("SFI {sfi} outside [0, 1]")));
    }
    Ok(calibrate_unclipped(y_raw, sfi, params.alpha, params.ref_mean_sfi).clamp(0.0, 1.0))
}

/// Apply [`calibrate`] element-wise.
pub fn calibrate_all(y_raw: &[f64], sfi: &[f64], params: &CalibrationParams) -> Result<Vec<f64>> {
    if y_raw.len() != sfi.len() {
        return Err(Error::domain(
            "probability and SFI vectors differ in length",
        ));
    }
    y_raw
        .iter()
        .zip(sfi)
        .map(|(&y, &s)| calibrate(y, s, params))
        .collect()
}

/// Closed-form `α*` minimising the mean squared error of the unclipped
/// calibrated predictions:
///
/// `α* = mean((Y − ŷ)·ŷ·r) / mean(ŷ²·r²)`.
pub fn estimate_optimal_alpha(
    labels: &[bool],
    y_raw: &[f64],
    sfi: &[f64],
    ref_mean_sfi: f64,
) -> Result<f64> {
    let n = labels.len();
    if n < 2 || y_raw.len() != n || sfi.len() != n {
        return Err(Error::domain(
            "optimal alpha needs equal-length inputs with at least two rows",
        ));
    }
    check_reference(ref_mean_sfi)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&y, &p), &s) in labels.iter().zip(y_raw).zip(sfi) {
        let r = relative_fidelity(s, ref_mean_sfi);
        let target = f64::from(u8::from(y));
        num += (target - p) * p * r;
        den += p * p * r * r;
    }
    if den == 0.0 {
        return Err(Error::degenerate(
            "every prediction or fidelity deviation is zero; alpha is unidentified",
        ));
    }
    Ok(num / den)
}

/// `mean((Y − y_raw)² − (Y − y_cal)²)`; positive when calibration lowered
/// the squared error.
pub fn calibration_error_delta(labels: &[bool], y_raw: &[f64], y_cal: &[f64]) -> Result<f64> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::domain("calibration error delta of an empty sample"));
    }
    if y_raw.len() != n || y_cal.len() != n {
        return Err(Error::domain("labels and predictions differ in length"));
    }
    let total: f64 = labels
        .iter()
        .zip(y_raw.iter().zip(y_cal))
        .map(|(&y, (&raw, &cal))| {
            let t = f64::from(u8::from(y));
            (t - raw).powi(2) - (t - cal).powi(2)
        })
        .sum();
    Ok(total / n as f64)
}
