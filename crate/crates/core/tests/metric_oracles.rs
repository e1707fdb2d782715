use proptest::prelude::*;

use sfi_lab::metrics::{auc, metric_set, DEFAULT_THRESHOLD};

/// Straight pairwise concordance, ties counted as one half.
fn auc_pairs(labels: &[bool], probs: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi && !yj {
                den += 1.0;
                if probs[i] > probs[j] {
                    num += 1.0;
                } else if probs[i] == probs[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn sample() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (1usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n),
            // coarse grid so ties are common
            prop::collection::vec((0u32..=20).prop_map(|k| k as f64 / 20.0), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auc_matches_pairwise_concordance((labels, probs) in sample()) {
        let fast = auc(&labels, &probs).unwrap();
        let slow = auc_pairs(&labels, &probs);
        match (fast, slow) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}"),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval((labels, probs) in sample()) {
        let m = metric_set(&labels, &probs, DEFAULT_THRESHOLD).unwrap();
        for v in [m.auc, m.balanced_accuracy, m.detection_rate, m.f1, m.precision, m.recall, m.brier]
            .into_iter()
            .flatten()
        {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn auc_is_one_half_for_constant_scores() {
    let labels = [true, false, true, false, false];
    assert_eq!(auc(&labels, &[0.3; 5]).unwrap(), Some(0.5));
}
