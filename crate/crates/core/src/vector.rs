//! Sparse and dense feature vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices and no explicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<u32>,
    #[serde(with = "crate::archive::blob")]
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from `(index, value)` pairs in any order. Duplicate
    /// indices are summed and zero results dropped.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::InvalidInput(format!(
                    "sparse index {i} out of range for dimension {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite value at index {i}")));
            }
            match indices.last() {
                Some(&last) if last as usize == i => *values.last_mut().unwrap() += v,
                _ => {
                    indices.push(i as u32);
                    values.push(v);
                }
            }
        }
        let mut out = SparseVector {
            dim,
            indices: Vec::with_capacity(values.len()),
            values: Vec::with_capacity(values.len()),
        };
        for (i, v) in indices.into_iter().zip(values) {
            if v != 0.0 {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Dense vector of finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(#[serde(with = "crate::archive::blob")] pub Vec<f64>);

impl DenseVector {
    pub fn zeros(dim: usize) -> Self {
        DenseVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Numeric representation of one document: sparse for count and TF-IDF
/// vectorizations, dense for embedding aggregations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "vector", rename_all = "snake_case")]
pub enum FeatureVector {
    Sparse(SparseVector),
    Dense(DenseVector),
}

impl From<SparseVector> for FeatureVector {
    fn from(v: SparseVector) -> Self {
        FeatureVector::Sparse(v)
    }
}

impl From<DenseVector> for FeatureVector {
    fn from(v: DenseVector) -> Self {
        FeatureVector::Dense(v)
    }
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Sparse(s) => s.dim(),
            FeatureVector::Dense(d) => d.dim(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        match self {
            FeatureVector::Sparse(s) => s.get(index),
            FeatureVector::Dense(d) => d.0[index],
        }
    }

    /// Visits every entry that may be nonzero, in increasing index order.
    /// Dense vectors visit all entries.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            FeatureVector::Sparse(s) => s.iter().for_each(|(i, v)| f(i, v)),
            FeatureVector::Dense(d) => d.0.iter().enumerate().for_each(|(i, &v)| f(i, v)),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVector::Sparse(s) => s.to_dense(),
            FeatureVector::Dense(d) => d.0.clone(),
        }
    }

    /// Dot product with a dense weight row of the same dimension.
    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        match self {
            FeatureVector::Sparse(s) => s.iter().map(|(i, v)| v * w[i]).sum(),
            FeatureVector::Dense(d) => d.0.iter().zip(w).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        match (self, other) {
            (FeatureVector::Dense(a), FeatureVector::Dense(b)) => {
                a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum()
            }
            (FeatureVector::Sparse(a), FeatureVector::Sparse(b)) => {
                let (ai, av, bi, bv) = (a.indices(), a.values(), b.indices(), b.values());
                let (mut i, mut j, mut acc) = (0, 0, 0.0);
                while i < ai.len() && j < bi.len() {
                    match ai[i].cmp(&bi[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            acc += av[i] * bv[j];
                            i += 1;
                            j += 1;
                        }
                    }
                }
                acc
            }
            (FeatureVector::Sparse(s), FeatureVector::Dense(d))
            | (FeatureVector::Dense(d), FeatureVector::Sparse(s)) => {
                s.iter().map(|(i, v)| v * d.0[i]).sum()
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match self {
            FeatureVector::Sparse(s) => s.values().iter().map(|v| v * v).sum(),
            FeatureVector::Dense(d) => d.0.iter().map(|v| v * v).sum(),
        }
    }

    /// Squared Euclidean distance, accumulated in increasing index order so
    /// that sparse and dense operands give bit-identical results.
    pub fn squared_distance(&self, other: &FeatureVector) -> f64 {
        match (self, other) {
            (FeatureVector::Dense(a), FeatureVector::Dense(b)) => a
                .0
                .iter()
                .zip(&b.0)
                .map(|(x, y)| (x - y) * (x - y))
                .sum(),
            (FeatureVector::Sparse(a), FeatureVector::Sparse(b)) => {
                let (ai, av, bi, bv) = (a.indices(), a.values(), b.indices(), b.values());
                let (mut i, mut j, mut acc) = (0, 0, 0.0);
                while i < ai.len() || j < bi.len() {
                    let d = if j >= bi.len() || (i < ai.len() && ai[i] < bi[j]) {
                        i += 1;
                        av[i - 1]
                    } else if i >= ai.len() || bi[j] < ai[i] {
                        j += 1;
                        -bv[j - 1]
                    } else {
                        i += 1;
                        j += 1;
                        av[i - 1] - bv[j - 1]
                    };
                    acc += d * d;
                }
                acc
            }
            (FeatureVector::Sparse(s), FeatureVector::Dense(d))
            | (FeatureVector::Dense(d), FeatureVector::Sparse(s)) => {
                let dense = s.to_dense();
                dense
                    .iter()
                    .zip(&d.0)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum()
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            FeatureVector::Sparse(s) => s.values().iter().all(|v| v.is_finite()),
            FeatureVector::Dense(d) => d.0.iter().all(|v| v.is_finite()),
        }
    }

    /// First negative entry, if any.
    pub fn first_negative(&self) -> Option<(usize, f64)> {
        let mut found = None;
        self.for_each_nonzero(|i, v| {
            if found.is_none() && v < 0.0 {
                found = Some((i, v));
            }
        });
        found
    }
}
