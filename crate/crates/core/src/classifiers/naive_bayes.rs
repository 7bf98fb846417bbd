//! Multinomial naive Bayes with additive smoothing.

use serde::{Deserialize, Serialize};

use super::{argmax, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    pub alpha: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { alpha: 1.0 }
    }
}

impl NbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("classifier.alpha", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    pub n_features: usize,
    /// `ln P(c)`; `-inf` for classes absent from training.
    pub class_log_prior: Vec<f64>,
    /// Row-major `n_classes x n_features` of `ln theta_cj`.
    #[serde(with = "crate::archive::blob")]
    pub feature_log_prob: Vec<f64>,
}

impl MultinomialNb {
    pub fn theta(&self, class: usize, feature: usize) -> f64 {
        self.feature_log_prob[class * self.n_features + feature].exp()
    }

    pub fn joint_log_likelihood(&self, x: &FeatureVector) -> Vec<f64> {
        let p = self.n_features;
        self.class_log_prior
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + x.dot_dense(&self.feature_log_prob[c * p..(c + 1) * p])
            })
            .collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> usize {
        argmax(&self.joint_log_likelihood(x))
    }
}

/// `theta_cj = (sum of feature j over class c + alpha) / (sum of all features
/// over class c + alpha * p)`, priors are class frequencies.
pub fn train(ts: &TrainingSet, hp: &NbParams) -> Result<MultinomialNb> {
    let (c_count, p) = (ts.n_classes(), ts.dim());
    for x in ts.features() {
        if let Some((j, v)) = x.first_negative() {
            return Err(Error::InvalidInput(format!(
                "naive Bayes needs nonnegative features; feature {j} has value {v}"
            )));
        }
    }
    let mut sums = vec![0.0; c_count * p];
    for (x, &y) in ts.features().iter().zip(ts.labels()) {
        let row = &mut sums[y * p..(y + 1) * p];
        x.for_each_nonzero(|j, v| row[j] += v);
    }
    let counts = ts.class_counts();
    let n = ts.len() as f64;
    let class_log_prior = counts
        .iter()
        .map(|&k| if k == 0 { f64::NEG_INFINITY } else { (k as f64 / n).ln() })
        .collect();
    let mut feature_log_prob = vec![0.0; c_count * p];
    for c in 0..c_count {
        let row = &sums[c * p..(c + 1) * p];
        let denom = row.iter().sum::<f64>() + hp.alpha * p as f64;
        for j in 0..p {
            feature_log_prob[c * p + j] = ((row[j] + hp.alpha) / denom).ln();
        }
    }
    Ok(MultinomialNb {
        n_features: p,
        class_log_prior,
        feature_log_prob,
    })
}
