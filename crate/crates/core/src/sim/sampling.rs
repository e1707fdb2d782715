//! Low-level random variate helpers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};

/// Draw from a Dirichlet distribution.
///
/// Gamma variates are handled in log space so that very small
/// concentrations (down to ~1e-300) do not underflow to an all-zero vector:
/// for shape `a < 1`, `G(a) = G(a + 1) * U^(1/a)`.
pub fn dirichlet<R: Rng + ?Sized, const N: usize>(
    concentration: &[f64; N],
    rng: &mut R,
) -> Result<[f64; N]> {
    if let Some(c) = concentration.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::domain(format!(
            "Dirichlet concentration must be positive and finite, got {c}"
        )));
    }
    let mut logs = [0.0f64; N];
    for (slot, &a) in logs.iter_mut().zip(concentration) {
        *slot = if a < 1.0 {
            let g = Gamma::new(a + 1.0, 1.0).expect("shape > 1").sample(rng);
            let u: f64 = rng.random::<f64>();
            // random() is in [0, 1); map to (0, 1]
            g.ln() + (1.0 - u).ln() / a
        } else {
            Gamma::new(a, 1.0).expect("shape >= 1").sample(rng).ln()
        };
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0f64; N];
    let mut total = 0.0;
    for (o, l) in out.iter_mut().zip(&logs) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in &mut out {
        *o /= total;
    }
    Ok(out)
}

/// Normal variate restricted to `[lo, hi]` by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(mean, sd).expect("sd validated by caller");
    loop {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}

/// Index drawn from a categorical distribution with the given weights.
/// Weights need not be normalised; the last index absorbs rounding.
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn degenerate_dirichlet_concentrates_on_one_component() {
        let mut rng = rng_from_seed(3);
        let p = dirichlet(&[1e9, 1e-9, 1e-9, 1e-9, 1e-9], &mut rng).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-3, "{p:?}");
        assert!(p[1..].iter().all(|&x| x < 1e-3));
    }

    #[test]
    fn uniform_dirichlet_means() {
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let mut sums = [0.0; 5];
        for _ in 0..n {
            let p = dirichlet(&[1.0; 5], &mut rng).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
            for (s, x) in sums.iter_mut().zip(p) {
                *s += x;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn dirichlet_rejects_non_positive() {
        let mut rng = rng_from_seed(0);
        assert!(dirichlet(&[1.0, 0.0, 1.0], &mut rng).is_err());
        assert!(dirichlet(&[1.0, -2.0, 1.0], &mut rng).is_err());
        assert!(dirichlet(&[1.0, f64::NAN, 1.0], &mut rng).is_err());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = rng_from_seed(5);
        for _ in 0..10_000 {
            assert_eq!(categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
