//! Bagged trees and random forests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{self, Columns, DecisionTree, TreeParams};
use super::{majority, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaggedParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub seed: u64,
    /// `false` trains every tree on the training set itself.
    pub bootstrap: bool,
}

impl Default for BaggedParams {
    fn default() -> Self {
        BaggedParams {
            n_trees: 100,
            tree: TreeParams::default(),
            seed: 1,
            bootstrap: true,
        }
    }
}

impl BaggedParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("classifier.n_trees", "must be at least 1"));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub tree: TreeParams,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            tree: TreeParams::default(),
            seed: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("classifier.n_trees", "must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Error::config("classifier.mtry", "must be at least 1"));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl TreeEnsemble {
    /// Majority vote; ties go to the lowest class index.
    pub fn predict(&self, x: &FeatureVector) -> usize {
        majority(self.trees.iter().map(|t| t.predict(x)), self.n_classes)
    }
}

/// Sample multiplicities of `n` draws with replacement.
fn bootstrap_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for _ in 0..n {
        w[rng.gen_range(0..n)] += 1.0;
    }
    w
}

fn grow_all(
    ts: &TrainingSet,
    n_trees: usize,
    hp: &TreeParams,
    seed: u64,
    bootstrap: bool,
    mtry: Option<usize>,
) -> TreeEnsemble {
    let cols = Columns::new(ts.features());
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let weights = if bootstrap {
                bootstrap_weights(ts.len(), &mut rng)
            } else {
                vec![1.0; ts.len()]
            };
            tree::train_weighted(&cols, ts, hp, &weights, mtry.map(|k| (k, &mut rng)))
        })
        .collect();
    TreeEnsemble {
        n_classes: ts.n_classes(),
        trees,
    }
}

pub fn train_bagged(ts: &TrainingSet, hp: &BaggedParams) -> Result<TreeEnsemble> {
    hp.validate()?;
    Ok(grow_all(ts, hp.n_trees, &hp.tree, hp.seed, hp.bootstrap, None))
}

pub fn train_forest(ts: &TrainingSet, hp: &ForestParams) -> Result<TreeEnsemble> {
    hp.validate()?;
    let p = ts.dim();
    let mtry = hp.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize);
    if mtry > p {
        return Err(Error::config(
            "classifier.mtry",
            format!("{mtry} exceeds the feature dimension {p}"),
        ));
    }
    Ok(grow_all(ts, hp.n_trees, &hp.tree, hp.seed, hp.bootstrap, Some(mtry)))
}
