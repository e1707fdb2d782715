//! Paired tests, confidence intervals and effect sizes.

pub mod dist;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonMethod, EXACT_MAX_N};

/// Outcome of a hypothesis test.
///
/// A degenerate test (zero variance, no non-zero differences) has
/// `degenerate = true` and no statistic or p-value; its interval collapses
/// onto the estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    /// Mean difference (t tests) or median difference (signed-rank).
    pub estimate: f64,
    pub statistic: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub effect_size: Option<f64>,
    pub degenerate: bool,
}

impl TestResult {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value.is_some_and(|p| p < level)
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; requires `x.len() >= 2`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Sample mean with a two-sided t-distribution confidence interval.
pub fn mean_ci_t(sample: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    if sample.len() < 2 {
        return Err(Error::domain(
            "a t interval needs at least two observations",
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let n = sample.len() as f64;
    let m = mean(sample);
    let se = (variance(sample) / n).sqrt();
    if se == 0.0 {
        return Ok((m, m, m));
    }
    let half = dist::t_critical(level, n - 1.0) * se;
    Ok((m, m - half, m + half))
}

/// Two-sided one-sample t test of `mean(x) = 0` with a 95% interval.
pub fn one_sample_t_test(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if n < 2 {
        return Err(Error::domain("a t test needs at least two observations"));
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    if sd == 0.0 {
        return Ok(TestResult {
            n,
            estimate: m,
            statistic: None,
            df: Some((n - 1) as f64),
            p_value: None,
            ci_low: m,
            ci_high: m,
            effect_size: None,
            degenerate: true,
        });
    }
    let df = (n - 1) as f64;
    let se = sd / (n as f64).sqrt();
    let t = m / se;
    let half = dist::t_critical(0.95, df) * se;
    Ok(TestResult {
        n,
        estimate: m,
        statistic: Some(t),
        df: Some(df),
        p_value: Some(dist::t_two_sided(t, df)),
        ci_low: m - half,
        ci_high: m + half,
        effect_size: None,
        degenerate: false,
    })
}

/// Two-sided paired t test on `x − y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::domain("paired samples differ in length"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    one_sample_t_test(&d)
}

/// Cohen's conventional magnitude bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(d: f64) -> Self {
        match d.abs() {
            a if a < 0.2 => Magnitude::Negligible,
            a if a < 0.5 => Magnitude::Small,
            a if a < 0.8 => Magnitude::Medium,
            _ => Magnitude::Large,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: f64,
    pub magnitude: Magnitude,
}

fn effect(diff: f64, sd: f64) -> Result<EffectSize> {
    if sd == 0.0 {
        return Err(Error::degenerate("zero standard deviation in effect size"));
    }
    let d = diff / sd;
    Ok(EffectSize {
        d,
        magnitude: Magnitude::of(d),
    })
}

fn check_two_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::domain(
            "effect sizes need at least two observations per sample",
        ));
    }
    Ok(())
}

/// `(mean(x) − mean(y)) / s_pooled`, pooling with `n − 1` weights.
pub fn cohens_d_pooled(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    check_two_samples(x, y)?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled = ((n1 - 1.0) * variance(x) + (n2 - 1.0) * variance(y)) / (n1 + n2 - 2.0);
    effect(mean(x) - mean(y), pooled.sqrt())
}

/// `(mean(x) − mean(y)) / sqrt((s²_x + s²_y)/2)`.
pub fn cohens_d_avgvar(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    check_two_samples(x, y)?;
    effect(
        mean(x) - mean(y),
        (0.5 * (variance(x) + variance(y))).sqrt(),
    )
}

/// Bonferroni-adjusted p-value, capped at 1.
pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_t_example() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.statistic.unwrap() - 3.4641).abs() < 1e-4);
        assert_eq!(r.df, Some(2.0));
        assert!((r.p_value.unwrap() - 0.0742).abs() < 1e-3);
        assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
    }

    #[test]
    fn paired_t_identical_and_constant() {
        let x = [0.3, 0.5, 0.9];
        let r = paired_t_test(&x, &x).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.estimate, r.ci_low, r.ci_high), (0.0, 0.0, 0.0));
        let r = paired_t_test(&[6.0, 7.0, 8.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, None);
        assert_eq!(r.estimate, 5.0);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn paired_t_antisymmetry() {
        let x = [0.2, 0.9, 0.4, 0.7, 0.5];
        let y = [0.1, 0.5, 0.6, 0.2, 0.3];
        let a = paired_t_test(&x, &y).unwrap();
        let b = paired_t_test(&y, &x).unwrap();
        assert_eq!(a.statistic.unwrap(), -b.statistic.unwrap());
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn mean_ci_examples() {
        assert_eq!(mean_ci_t(&[1.0, 1.0, 1.0], 0.95).unwrap(), (1.0, 1.0, 1.0));
        let (m, lo, hi) = mean_ci_t(&[1.0, 2.0, 3.0], 0.95).unwrap();
        assert_eq!(m, 2.0);
        assert!((hi - m - 4.3027 / 3f64.sqrt()).abs() < 1e-3);
        assert!(((hi - m) - 2.4843).abs() < 1e-3);
        assert!(((m - lo) - (hi - m)).abs() < 1e-12);
        assert!(mean_ci_t(&[1.0], 0.95).is_err());
    }

    #[test]
    fn cohens_d_examples() {
        // means 1 and 0, both sd 1
        let x = [0.0, 1.0, 2.0];
        let y = [-1.0, 0.0, 1.0];
        assert!((cohens_d_pooled(&x, &y).unwrap().d - 1.0).abs() < 1e-15);
        assert_eq!(cohens_d_pooled(&x, &x).unwrap().d, 0.0);
        assert_eq!(
            cohens_d_pooled(&x, &y).unwrap().d,
            cohens_d_avgvar(&x, &y).unwrap().d
        );
        // means 2 and 1, variances 1 and 3
        let a = [1.0, 2.0, 3.0];
        let s3 = 3f64.sqrt();
        let b = [1.0 - s3, 1.0, 1.0 + s3];
        assert!((cohens_d_avgvar(&a, &b).unwrap().d - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            cohens_d_pooled(&[1.0, 1.0], &[2.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(Magnitude::of(0.1), Magnitude::Negligible);
        assert_eq!(Magnitude::of(-0.3), Magnitude::Small);
        assert_eq!(Magnitude::of(0.5), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.8), Magnitude::Large);
    }

    #[test]
    fn quantiles() {
        let x = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(bonferroni(0.02, 10), 0.2);
        assert_eq!(bonferroni(0.2, 10), 1.0);
    }
}
