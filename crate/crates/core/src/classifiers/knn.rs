//! k-nearest neighbors over stored training vectors.

use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    /// `1 - cos(x, z)`; distance 1 when either side is the zero vector.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            metric: Metric::Euclidean,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("classifier.k", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub metric: Metric,
    pub n_classes: usize,
    pub features: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    norms: Vec<f64>,
}

pub fn train(ts: &TrainingSet, hp: &KnnParams) -> Result<Knn> {
    hp.validate()?;
    if hp.k > ts.len() {
        return Err(Error::InvalidInput(format!(
            "k = {} exceeds the {} training samples",
            hp.k,
            ts.len()
        )));
    }
    Ok(Knn {
        k: hp.k,
        metric: hp.metric,
        n_classes: ts.n_classes(),
        features: ts.features().to_vec(),
        labels: ts.labels().to_vec(),
        norms: ts.features().iter().map(|x| x.squared_norm().sqrt()).collect(),
    })
}

impl Knn {
    pub fn distance_to(&self, i: usize, x: &FeatureVector, x_norm: f64) -> f64 {
        match self.metric {
            Metric::Euclidean => self.features[i].squared_distance(x).sqrt(),
            Metric::Cosine => {
                let denom = self.norms[i] * x_norm;
                if denom == 0.0 {
                    1.0
                } else {
                    1.0 - self.features[i].dot(x) / denom
                }
            }
        }
    }

    /// The `k` nearest training indices with distances, ordered by
    /// `(distance, index)`.
    pub fn neighbors(&self, x: &FeatureVector) -> Vec<(f64, usize)> {
        let x_norm = x.squared_norm().sqrt();
        let mut all: Vec<(f64, usize)> = (0..self.labels.len())
            .map(|i| (self.distance_to(i, x, x_norm), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < all.len() {
            all.select_nth_unstable_by(self.k - 1, cmp);
            all.truncate(self.k);
        }
        all.sort_by(cmp);
        all
    }

    /// Majority vote; ties go to the smaller summed distance, then the lower
    /// class index.
    pub fn predict(&self, x: &FeatureVector) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        let mut dist = vec![0.0; self.n_classes];
        for (d, i) in self.neighbors(x) {
            votes[self.labels[i]] += 1;
            dist[self.labels[i]] += d;
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }
}
