//! Wilcoxon signed-rank test.
//!
//! Zero differences are dropped and tied magnitudes get mid-ranks. Ranks are
//! carried doubled so that mid-ranks stay integral and the exact null
//! distribution can be built by dynamic programming over rank sums; for
//! `n <= EXACT_MAX_N` this is identical to enumerating all `2^n` sign
//! patterns. Larger samples use the tie-corrected normal approximation with
//! a continuity correction.
//!
//! The reported statistic is the signed rank sum `W = W⁺ − W⁻`, which
//! changes sign when the two samples are swapped.

use serde::{Deserialize, Serialize};

use super::{dist, median, quantile, TestResult};
use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    /// Exact for `n <= EXACT_MAX_N`, normal approximation above.
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Doubled mid-ranks of `|d|` for the non-zero differences.
fn doubled_ranks(nonzero: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..nonzero.len()).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().total_cmp(&nonzero[b].abs()));
    let mut ranks = vec![0u64; nonzero.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let mid2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = mid2;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p-value: the share of sign patterns whose |signed rank
/// sum| is at least the observed one.
fn exact_p(ranks2: &[u64], observed_pos2: u64) -> f64 {
    let total2: u64 = ranks2.iter().sum();
    let mut counts = vec![0u64; total2 as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let obs = (2 * observed_pos2 as i64 - total2 as i64).abs();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (2 * *s as i64 - total2 as i64).abs() >= obs)
        .map(|(_, c)| *c)
        .sum();
    extreme as f64 / (1u64 << ranks2.len()) as f64
}

fn normal_p(ranks2: &[u64], observed_pos2: u64) -> f64 {
    let n = ranks2.len() as f64;
    let mut sorted = ranks2.to_vec();
    sorted.sort_unstable();
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let w_pos = observed_pos2 as f64 / 2.0;
    let z = ((w_pos - n * (n + 1.0) / 4.0).abs() - 0.5) / var.sqrt();
    if z <= 0.0 {
        1.0
    } else {
        dist::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    }
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(x, y, WilcoxonMethod::Auto)
}

/// Signed-rank test of `x − y`. The interval is the empirical 2.5%–97.5%
/// range of the paired differences and the estimate is their median.
pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    method: WilcoxonMethod,
) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::domain("paired samples differ in length"));
    }
    if x.is_empty() {
        return Err(Error::domain("signed-rank test of an empty sample"));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let estimate = median(&diffs);
    let (ci_low, ci_high) = (quantile(&diffs, 0.025), quantile(&diffs, 0.975));
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(TestResult {
            n: 0,
            estimate,
            statistic: None,
            df: None,
            p_value: None,
            ci_low,
            ci_high,
            effect_size: None,
            degenerate: true,
        });
    }
    let ranks2 = doubled_ranks(&nonzero);
    let pos2: u64 = nonzero
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let signed = (2.0 * pos2 as f64 - total2 as f64) / 2.0;
    let use_exact = match method {
        WilcoxonMethod::Auto => nonzero.len() <= EXACT_MAX_N,
        WilcoxonMethod::Exact => {
            if nonzero.len() > 62 {
                return Err(Error::domain(
                    "exact signed-rank test limited to 62 differences",
                ));
            }
            true
        }
        WilcoxonMethod::Normal => false,
    };
    let p = if use_exact {
        exact_p(&ranks2, pos2)
    } else {
        normal_p(&ranks2, pos2)
    };
    Ok(TestResult {
        n: nonzero.len(),
        estimate,
        statistic: Some(signed),
        df: None,
        p_value: Some(p),
        ci_low,
        ci_high,
        effect_size: None,
        degenerate: false,
    })
}
