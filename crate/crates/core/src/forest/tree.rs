use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureMatrix};

/// How a split node routes a row. Rows satisfying the rule go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// `value <= threshold`.
    Threshold(f64),
    /// Category level is in the bit set.
    Categories(u64),
}

impl SplitRule {
    fn goes_left(&self, value: f64) -> bool {
        match *self {
            SplitRule::Threshold(t) => value <= t,
            SplitRule::Categories(mask) => {
                let level = value as u32;
                level < 64 && mask & (1u64 << level) != 0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        positive_fraction: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

/// Binary classification tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn leaf_fraction(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf {
                    positive_fraction, ..
                } => return *positive_fraction,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => {
                    idx = if rule.goes_left(row[*feature]) {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// The tree's vote for class 1: 1, 0, or 0.5 when the leaf is tied.
    pub fn vote(&self, row: &[f64]) -> f64 {
        let f = self.leaf_fraction(row);
        if f > 0.5 {
            1.0
        } else if f < 0.5 {
            0.0
        } else {
            0.5
        }
    }
}

pub(crate) struct TreeParams {
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

struct Candidate {
    feature: usize,
    rule: SplitRule,
    /// Weighted child impurity (sum of n·gini over both children).
    impurity: f64,
}

/// `n · gini` for a node with `pos` positives out of `n`.
fn weighted_gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        2.0 * pos * (n - pos) / n
    }
}

fn best_numeric(
    x: &FeatureMatrix,
    labels: &[bool],
    rows: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let mut pairs: Vec<(f64, bool)> = rows
        .iter()
        .map(|&r| (x.get(r, feature), labels[r]))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let total_pos = pairs.iter().filter(|p| p.1).count() as f64;
    let mut left_pos = 0.0;
    let mut best: Option<Candidate> = None;
    for i in 0..n - 1 {
        left_pos += f64::from(u8::from(pairs[i].1));
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let imp =
            weighted_gini(left_pos, nl as f64) + weighted_gini(total_pos - left_pos, nr as f64);
        if best.as_ref().is_none_or(|b| imp < b.impurity) {
            best = Some(Candidate {
                feature,
                rule: SplitRule::Threshold(0.5 * (pairs[i].0 + pairs[i + 1].0)),
                impurity: imp,
            });
        }
    }
    best
}

/// Best subset split for a categorical feature. For binary targets, ordering
/// levels by their positive share and scanning prefixes finds the optimal
/// Gini partition.
fn best_categorical(
    x: &FeatureMatrix,
    labels: &[bool],
    rows: &[usize],
    feature: usize,
    levels: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let mut counts = vec![(0.0f64, 0usize); levels];
    for &r in rows {
        let level = x.get(r, feature) as usize;
        counts[level].0 += f64::from(u8::from(labels[r]));
        counts[level].1 += 1;
    }
    let mut present: Vec<usize> = (0..levels).filter(|&l| counts[l].1 > 0).collect();
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|&a, &b| {
        let fa = counts[a].0 / counts[a].1 as f64;
        let fb = counts[b].0 / counts[b].1 as f64;
        fa.total_cmp(&fb).then(a.cmp(&b))
    });
    let n = rows.len();
    let total_pos: f64 = counts.iter().map(|c| c.0).sum();
    let (mut left_pos, mut nl, mut mask) = (0.0, 0usize, 0u64);
    let mut best: Option<Candidate> = None;
    for &level in &present[..present.len() - 1] {
        left_pos += counts[level].0;
        nl += counts[level].1;
        mask |= 1u64 << level;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let imp =
            weighted_gini(left_pos, nl as f64) + weighted_gini(total_pos - left_pos, nr as f64);
        if best.as_ref().is_none_or(|b| imp < b.impurity) {
            best = Some(Candidate {
                feature,
                rule: SplitRule::Categories(mask),
                impurity: imp,
            });
        }
    }
    best
}

const MIN_GAIN: f64 = 1e-12;

/// Grow one tree on the rows listed in `sample` (a bootstrap resample, so
/// indices may repeat).
pub(crate) fn grow<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    labels: &[bool],
    sample: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let mut nodes = Vec::new();
    // (rows, depth, slot in `nodes` to fill)
    let mut stack = vec![(sample, 0usize, 0usize)];
    nodes.push(Node::Leaf {
        positive_fraction: 0.0,
        samples: 0,
    });
    let n_features = x.n_features();
    let mut order: Vec<usize> = (0..n_features).collect();

    while let Some((rows, depth, slot)) = stack.pop() {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| labels[r]).count();
        let leaf = Node::Leaf {
            positive_fraction: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
            samples: n,
        };
        let at_limit = params.max_depth.is_some_and(|d| depth >= d);
        if pos == 0 || pos == n || n < 2 * params.min_leaf || at_limit {
            nodes[slot] = leaf;
            continue;
        }
        let parent = weighted_gini(pos as f64, n as f64);

        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        // Try mtry features first; fall back to the rest only when none of
        // them yields a useful split.
        for (k, &f) in order.iter().enumerate() {
            if k >= params.mtry && best.is_some() {
                break;
            }
            let cand = match x.kind(f) {
                FeatureKind::Numeric => best_numeric(x, labels, &rows, f, params.min_leaf),
                FeatureKind::Categorical { levels } => {
                    best_categorical(x, labels, &rows, f, levels, params.min_leaf)
                }
            };
            if let Some(c) = cand.filter(|c| parent - c.impurity > MIN_GAIN) {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            nodes[slot] = leaf;
            continue;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| split.rule.goes_left(x.get(r, split.feature)));
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            positive_fraction: 0.0,
            samples: 0,
        });
        nodes.push(Node::Leaf {
            positive_fraction: 0.0,
            samples: 0,
        });
        nodes[slot] = Node::Split {
            feature: split.feature,
            rule: split.rule,
            left,
            right,
        };
        stack.push((right_rows, depth + 1, right));
        stack.push((left_rows, depth + 1, left));
    }
    Tree { nodes }
}
