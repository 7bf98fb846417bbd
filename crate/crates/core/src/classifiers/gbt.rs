//! Second-order gradient boosted regression trees on the softmax objective.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Columns, GrowParams, SplitTask, Tree};
use super::{argmax, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    /// Recorded with the run; the exact greedy learner draws no randomness.
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            seed: 1,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::config("classifier.n_rounds", "must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("classifier.learning_rate", "must be finite and >= 0"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("classifier.lambda", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Stats are `[count, sum g, sum h]`.
struct BoostTask<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
}

impl BoostTask<'_> {
    fn term(&self, g: f64, h: f64) -> f64 {
        let d = h + self.lambda;
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    }
}

impl SplitTask for BoostTask<'_> {
    type Leaf = f64;

    fn width(&self) -> usize {
        3
    }

    fn add(&self, s: usize, weight: f64, acc: &mut [f64]) {
        acc[0] += weight;
        acc[1] += weight * self.g[s];
        acc[2] += weight * self.h[s];
    }

    fn is_pure(&self, _: &[f64]) -> bool {
        false
    }

    fn node_score(&self, st: &[f64]) -> f64 {
        -0.5 * self.term(st[1], st[2])
    }

    fn gain(&self, l: &[f64], r: &[f64], p: &[f64], _: f64) -> f64 {
        0.5 * (self.term(l[1], l[2]) + self.term(r[1], r[2]) - self.term(p[1], p[2]))
    }

    fn min_gain(&self) -> f64 {
        1e-12
    }

    /// Unscaled Newton step `-G / (H + lambda)`.
    fn leaf(&self, st: &[f64]) -> f64 {
        let d = st[2] + self.lambda;
        if d > 0.0 {
            -st[1] / d
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_classes: usize,
    /// `rounds[r][c]`, leaf values already scaled by the learning rate.
    pub rounds: Vec<Vec<Tree<f64>>>,
    /// Mean training cross-entropy after each round.
    pub losses: Vec<f64>,
}

impl GbtModel {
    /// Raw class scores; the base score is 0 for every class.
    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut s = vec![0.0; self.n_classes];
        for round in &self.rounds {
            for (c, t) in round.iter().enumerate() {
                s[c] += t.value(x);
            }
        }
        s
    }

    pub fn predict(&self, x: &FeatureVector) -> usize {
        argmax(&self.scores(x))
    }
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn cross_entropy(scores: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for (row, &y) in scores.chunks(k).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / n as f64
}

pub fn train(ts: &TrainingSet, hp: &GbtParams) -> Result<GbtModel> {
    hp.validate()?;
    let (n, k) = (ts.len(), ts.n_classes());
    let cols = Columns::new(ts.features());
    let weights = vec![1.0; n];
    let gp = GrowParams {
        max_depth: hp.max_depth,
        min_samples_leaf: 1.0,
    };
    let mut scores = vec![0.0; n * k];
    let mut rounds = Vec::with_capacity(hp.n_rounds);
    let mut losses = Vec::with_capacity(hp.n_rounds);
    for _ in 0..hp.n_rounds {
        let probs: Vec<Vec<f64>> = scores.chunks(k).map(softmax).collect();
        let fitted: Vec<(Tree<f64>, Vec<u32>)> = (0..k)
            .into_par_iter()
            .map(|c| {
                let mut g = vec![0.0; n];
                let mut h = vec![0.0; n];
                for s in 0..n {
                    let p = probs[s][c];
                    g[s] = p - if ts.labels()[s] == c { 1.0 } else { 0.0 };
                    h[s] = p * (1.0 - p);
                }
                let task = BoostTask {
                    g: &g,
                    h: &h,
                    lambda: hp.lambda,
                };
                let (mut tree, leaf_of) = grow(&cols, &task, &weights, &gp, None);
                for node in &mut tree.nodes {
                    if let super::tree::Node::Leaf { value } = node {
                        *value *= hp.learning_rate;
                    }
                }
                (tree, leaf_of)
            })
            .collect();
        let mut round = Vec::with_capacity(k);
        for (c, (tree, leaf_of)) in fitted.into_iter().enumerate() {
            for s in 0..n {
                if let super::tree::Node::Leaf { value } = &tree.nodes[leaf_of[s] as usize] {
                    scores[s * k + c] += value;
                }
            }
            round.push(tree);
        }
        let loss = cross_entropy(&scores, ts.labels(), k);
        if !loss.is_finite() {
            return Err(Error::Numeric("boosting loss is not finite".into()));
        }
        losses.push(loss);
        rounds.push(round);
    }
    Ok(GbtModel {
        n_classes: k,
        rounds,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::DenseVector;

    fn fv(v: &[f64]) -> FeatureVector {
        DenseVector(v.to_vec()).into()
    }

    fn four() -> TrainingSet {
        TrainingSet::new(
            vec![fv(&[0.0]), fv(&[1.0]), fv(&[2.0]), fv(&[3.0])],
            vec![0, 0, 0, 1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_newton_step() {
        // p = 1/2 everywhere: class 0 has G = 3 * (-1/2) + 1/2 = -1 and
        // H = 4 * 1/4 = 1, so its leaf is 1; class 1 mirrors it.
        let hp = GbtParams {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: 0,
            lambda: 0.0,
            seed: 0,
        };
        let m = train(&four(), &hp).unwrap();
        assert_eq!(m.scores(&fv(&[7.0])), vec![1.0, -1.0]);
    }

    #[test]
    fn zero_learning_rate_keeps_base_score() {
        let hp = GbtParams {
            n_rounds: 3,
            learning_rate: 0.0,
            ..Default::default()
        };
        let m = train(&four(), &hp).unwrap();
        for x in [0.0, 1.5, 3.0] {
            assert_eq!(m.scores(&fv(&[x])), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn loss_decreases_and_fits() {
        let m = train(&four(), &GbtParams { n_rounds: 50, ..Default::default() }).unwrap();
        for w in m.losses.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(m.predict(&fv(&[3.0])), 1);
        assert_eq!(m.predict(&fv(&[0.0])), 0);
    }
}
