//! Bagged decision-tree classifier.
//!
//! Each tree is grown on a bootstrap resample with Gini splits over `mtry`
//! randomly chosen features per node. Numeric features split at midpoints
//! between sorted distinct values; categorical features split on subsets of
//! levels. The forest probability is the fraction of trees voting for
//! class 1, with a tied leaf contributing half a vote.

mod tree;

use std::collections::HashMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::PatientRecord;

pub use tree::{Node, SplitRule, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Values are level indices `0..levels` stored as `f64`.
    Categorical {
        levels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

/// Row-major feature matrix with a typed schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: Vec<FeatureSpec>,
    data: Vec<f64>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(schema: Vec<FeatureSpec>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = schema.len();
        if width == 0 {
            return Err(Error::domain("feature schema is empty"));
        }
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, schema has {width}",
                    row.len()
                )));
            }
            for (v, spec) in row.iter().zip(&schema) {
                let ok = match spec.kind {
                    FeatureKind::Numeric => v.is_finite(),
                    FeatureKind::Categorical { levels } => {
                        v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < levels
                    }
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "row {i}: value {v} invalid for feature {}",
                        spec.name
                    )));
                }
            }
            data.extend(row);
        }
        Ok(FeatureMatrix {
            schema,
            data,
            n_rows,
        })
    }

    /// The two-column schema used throughout: numeric age and 5-level race.
    pub fn demographic_schema() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec {
                name: "age".into(),
                kind: FeatureKind::Numeric,
            },
            FeatureSpec {
                name: "race".into(),
                kind: FeatureKind::Categorical { levels: 5 },
            },
        ]
    }

    pub fn demographics(patients: &[PatientRecord]) -> Self {
        let rows = patients
            .iter()
            .map(|p| vec![p.age as f64, p.race.index() as f64])
            .collect();
        Self::new(Self::demographic_schema(), rows).expect("demographics fit the schema")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &[FeatureSpec] {
        &self.schema
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.schema.len();
        &self.data[i * w..(i + 1) * w]
    }

    pub(crate) fn get(&self, row: usize, feature: usize) -> f64 {
        self.data[row * self.schema.len() + feature]
    }

    pub(crate) fn kind(&self, feature: usize) -> FeatureKind {
        self.schema[feature].kind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub mtry: usize,
    pub min_leaf: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: 1,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn collect_violations(&self, prefix: &str, out: &mut Vec<String>) {
        if self.n_trees == 0 {
            out.push(format!("{prefix}n_trees must be at least 1"));
        }
        if self.mtry == 0 {
            out.push(format!("{prefix}mtry must be at least 1"));
        }
        if self.min_leaf == 0 {
            out.push(format!("{prefix}min_leaf must be at least 1"));
        }
        if self.max_depth == Some(0) {
            out.push(format!("{prefix}max_depth must be at least 1 when set"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema: Vec<FeatureSpec>,
    pub trees: Vec<Tree>,
}

/// Fit a forest. Trees are grown in parallel from per-tree RNG streams
/// derived from `config.seed`, so the result does not depend on the number
/// of worker threads.
pub fn train(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &ForestConfig,
) -> Result<ForestModel> {
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if labels.len() != n {
        return Err(Error::domain(format!(
            "{} feature rows but {} labels",
            n,
            labels.len()
        )));
    }
    let mut problems = Vec::new();
    config.collect_violations("", &mut problems);
    if config.mtry > features.n_features() {
        problems.push(format!(
            "mtry ({}) exceeds the number of features ({})",
            config.mtry,
            features.n_features()
        ));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let params = tree::TreeParams {
        mtry: config.mtry,
        min_leaf: config.min_leaf,
        max_depth: config.max_depth,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(config.seed, &[t as u64]));
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            tree::grow(features, labels, sample, &params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        schema: features.schema().to_vec(),
        trees,
    })
}

impl ForestModel {
    fn vote_fraction(&self, row: &[f64]) -> f64 {
        let votes: f64 = self.trees.iter().map(|t| t.vote(row)).sum();
        votes / self.trees.len() as f64
    }

    /// Class-1 probability for every row. Identical rows are routed once.
    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.schema() != self.schema.as_slice() {
            return Err(Error::Schema(
                "prediction features do not match the training schema".into(),
            ));
        }
        let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
        Ok((0..features.n_rows())
            .map(|i| {
                let row = features.row(i);
                let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
                *cache.entry(key).or_insert_with(|| self.vote_fraction(row))
            })
            .collect())
    }
}

/// Uniformly random disjoint halves. An odd-sized input loses one random
/// record first.
pub fn split_half<T: Clone>(items: &[T], seed: u64) -> (Vec<T>, Vec<T>) {
    let mut rng = rng_from_seed(seed);
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut rng);
    if idx.len() % 2 == 1 {
        let dropped = idx.pop().expect("odd length is non-empty");
        warn!(
            "split_half: odd dataset size {}, dropping record {dropped}",
            items.len()
        );
    }
    let half = idx.len() / 2;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    (pick(&idx[..half]), pick(&idx[half..]))
}
