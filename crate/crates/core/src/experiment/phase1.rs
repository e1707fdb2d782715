//! α sweep and plateau selection.

use serde::{Deserialize, Serialize};

use super::BatchSummary;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::stats::one_sample_t_test;

/// Mean batch-level improvement `P̄_cal(α) − P̄_raw` of one metric at one α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepRow {
    pub metric: Metric,
    pub alpha: f64,
    /// Batches where the metric is defined for both raw and calibrated.
    pub n: usize,
    pub mean_improvement: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: Option<f64>,
    pub significant: bool,
}

/// Build sweep rows for every metric (including Brier) and every α present
/// in the summaries. Row order is metric-major, α ascending.
pub fn alpha_sweep(summaries: &[BatchSummary], level: f64) -> Result<Vec<AlphaSweepRow>> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::domain("alpha sweep over zero batches"))?;
    let alphas = &first.alphas;
    if summaries.iter().any(|s| &s.alphas != alphas) {
        return Err(Error::domain(
            "batches were evaluated on different alpha grids",
        ));
    }
    let mut rows = Vec::with_capacity(Metric::ALL.len() * alphas.len());
    for metric in Metric::ALL {
        for (k, &alpha) in alphas.iter().enumerate() {
            let diffs: Vec<f64> = summaries
                .iter()
                .filter_map(|s| Some(s.calibrated[k].get(metric)? - s.raw.get(metric)?))
                .collect();
            rows.push(sweep_row(metric, alpha, &diffs, level)?);
        }
    }
    Ok(rows)
}

fn sweep_row(metric: Metric, alpha: f64, diffs: &[f64], level: f64) -> Result<AlphaSweepRow> {
    let n = diffs.len();
    let row = |mean, lo, hi, p: Option<f64>| AlphaSweepRow {
        metric,
        alpha,
        n,
        mean_improvement: mean,
        ci_low: lo,
        ci_high: hi,
        p_value: p,
        significant: p.is_some_and(|p| p < level),
    };
    Ok(match n {
        0 => row(f64::NAN, f64::NAN, f64::NAN, None),
        1 => row(diffs[0], diffs[0], diffs[0], None),
        _ => {
            let t = one_sample_t_test(diffs)?;
            row(t.estimate, t.ci_low, t.ci_high, t.p_value)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Smallest significant α whose grid successor is not significant.
    Plateau,
    /// No plateau below the cap: largest significant α within the cap.
    Fallback,
    /// No significant α within the cap.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOptimum {
    pub metric: Metric,
    pub alpha_opt: Option<f64>,
    pub rule: SelectionRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Selection {
    pub optima: Vec<MetricOptimum>,
    pub recommended: f64,
}

/// Apply the plateau rule to one metric's p-values over `grid`. A missing
/// p-value counts as not significant.
pub fn plateau_alpha(
    grid: &[f64],
    p: &[Option<f64>],
    cap: f64,
    level: f64,
) -> (Option<f64>, SelectionRule) {
    let sig = |i: usize| p[i].is_some_and(|p| p < level);
    let plateau =
        (0..grid.len().saturating_sub(1)).find(|&i| sig(i) && !sig(i + 1) && grid[i] <= cap);
    if let Some(i) = plateau {
        return (Some(grid[i]), SelectionRule::Plateau);
    }
    match (0..grid.len()).rev().find(|&i| sig(i) && grid[i] <= cap) {
        Some(i) => (Some(grid[i]), SelectionRule::Fallback),
        None => (None, SelectionRule::None),
    }
}

/// Median of per-metric optima; an even count averages the middle pair and
/// snaps down to the nearest grid value at or below the average.
pub fn median_on_grid(optima: &[f64], grid: &[f64]) -> Option<f64> {
    let mut v = optima.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return None;
    }
    if n % 2 == 1 {
        return Some(v[n / 2]);
    }
    let mid = 0.5 * (v[n / 2 - 1] + v[n / 2]);
    grid.iter()
        .rev()
        .find(|&&g| g <= mid)
        .copied()
        .or(Some(v[n / 2 - 1]))
}

/// Select per-metric optima and the recommended α from sweep rows.
///
/// Only the six threshold and ranking metrics vote; Brier is reported in the
/// sweep but does not enter the median. When no metric has a significant α
/// the smallest grid value is returned.
pub fn phase1_select_alpha(
    rows: &[AlphaSweepRow],
    cap: f64,
    level: f64,
) -> Result<Phase1Selection> {
    if rows.is_empty() {
        return Err(Error::domain("phase 1 selection over an empty sweep"));
    }
    let mut optima = Vec::new();
    for metric in Metric::PERFORMANCE {
        let mut mrows: Vec<&AlphaSweepRow> = rows.iter().filter(|r| r.metric == metric).collect();
        mrows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let grid: Vec<f64> = mrows.iter().map(|r| r.alpha).collect();
        let p: Vec<Option<f64>> = mrows.iter().map(|r| r.p_value).collect();
        let (alpha_opt, rule) = plateau_alpha(&grid, &p, cap, level);
        optima.push(MetricOptimum {
            metric,
            alpha_opt,
            rule,
        });
    }
    let mut grid: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let chosen: Vec<f64> = optima.iter().filter_map(|o| o.alpha_opt).collect();
    let recommended = median_on_grid(&chosen, &grid).map_or(grid[0], |m| m.min(cap));
    Ok(Phase1Selection {
        optima,
        recommended,
    })
}
