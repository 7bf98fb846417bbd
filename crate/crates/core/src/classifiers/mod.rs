//! Supervised learners behind one train/predict contract.
//!
//! Every learner breaks ties deterministically, with the lowest class index
//! as the final resort, so repeated predictions are bit-stable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::FeatureVector;

pub mod ann;
pub mod ensemble;
pub mod gbt;
pub mod knn;
pub mod logreg;
pub mod naive_bayes;
pub mod svm;
pub mod tree;

pub use ann::{AnnParams, Mlp};
pub use ensemble::{BaggedParams, ForestParams, TreeEnsemble};
pub use gbt::{GbtModel, GbtParams};
pub use knn::{Knn, KnnParams, Metric};
pub use logreg::{LogReg, LogRegParams};
pub use naive_bayes::{MultinomialNb, NbParams};
pub use svm::{Kernel, SvmModel, SvmParams};
pub use tree::{Criterion, DecisionTree, TreeParams};

/// Feature vectors with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<FeatureVector>,
    labels: Vec<usize>,
    n_classes: usize,
    dim: usize,
}

impl TrainingSet {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if n_classes == 0 || features.len() < n_classes {
            return Err(Error::Data(format!(
                "training set of {} samples cannot cover {n_classes} classes",
                features.len()
            )));
        }
        let dim = features[0].dim();
        if dim == 0 {
            return Err(Error::Data("feature dimension is zero".into()));
        }
        for (i, (x, &y)) in features.iter().zip(&labels).enumerate() {
            if x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.dim(),
                });
            }
            if y >= n_classes {
                return Err(Error::InvalidInput(format!(
                    "sample {i}: label {y} out of range for {n_classes} classes"
                )));
            }
            if !x.is_finite() {
                return Err(Error::Numeric(format!("sample {i} has non-finite features")));
            }
        }
        Ok(TrainingSet {
            features,
            labels,
            n_classes,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The samples at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        TrainingSet::new(
            idx.iter().map(|&i| self.features[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
        )
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }
}

/// Classifier algorithm with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Logreg(LogRegParams),
    NaiveBayes(NbParams),
    Knn(KnnParams),
    Tree(TreeParams),
    BaggedTrees(BaggedParams),
    RandomForest(ForestParams),
    Ann(AnnParams),
    Svm(SvmParams),
    Gbt(GbtParams),
}

impl ClassifierSpec {
    pub const ALGORITHMS: [&'static str; 9] = [
        "logreg",
        "naive-bayes",
        "knn",
        "tree",
        "bagged-trees",
        "random-forest",
        "ann",
        "svm",
        "gbt",
    ];

    /// Default hyperparameters for an algorithm name.
    pub fn default_for(algorithm: &str) -> Result<Self> {
        Ok(match algorithm {
            "logreg" => ClassifierSpec::Logreg(Default::default()),
            "naive-bayes" => ClassifierSpec::NaiveBayes(Default::default()),
            "knn" => ClassifierSpec::Knn(Default::default()),
            "tree" => ClassifierSpec::Tree(Default::default()),
            "bagged-trees" => ClassifierSpec::BaggedTrees(Default::default()),
            "random-forest" => ClassifierSpec::RandomForest(Default::default()),
            "ann" => ClassifierSpec::Ann(Default::default()),
            "svm" => ClassifierSpec::Svm(Default::default()),
            "gbt" => ClassifierSpec::Gbt(Default::default()),
            other => {
                return Err(Error::config(
                    "classifier.algorithm",
                    format!(
                        "unknown algorithm `{other}` (expected one of {})",
                        Self::ALGORITHMS.join(", ")
                    ),
                ))
            }
        })
    }

    pub fn algorithm(&self) -> &'static str {
        match self {
            ClassifierSpec::Logreg(_) => "logreg",
            ClassifierSpec::NaiveBayes(_) => "naive-bayes",
            ClassifierSpec::Knn(_) => "knn",
            ClassifierSpec::Tree(_) => "tree",
            ClassifierSpec::BaggedTrees(_) => "bagged-trees",
            ClassifierSpec::RandomForest(_) => "random-forest",
            ClassifierSpec::Ann(_) => "ann",
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Gbt(_) => "gbt",
        }
    }

    /// Short human-readable label, e.g. `tree(gini)` or `svm(radial)`.
    pub fn label(&self) -> String {
        match self {
            ClassifierSpec::Tree(p) => format!("tree({})", p.criterion.name()),
            ClassifierSpec::Svm(p) => format!("svm({})", p.kernel.name()),
            other => other.algorithm().to_string(),
        }
    }

    /// Returns a copy with the hyperparameter at dotted `path` (e.g. `k`,
    /// `c`, `tree.max_depth`, `kernel.gamma`) replaced by `value`.
    pub fn with_param(&self, path: &str, value: &serde_json::Value) -> Result<Self> {
        let mut json = serde_json::to_value(self).expect("spec serializes");
        let mut slot = &mut json;
        for part in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| {
                    Error::config(
                        format!("grid.{path}"),
                        format!("`{}` has no hyperparameter `{path}`", self.algorithm()),
                    )
                })?;
        }
        *slot = value.clone();
        let updated: ClassifierSpec = serde_json::from_value(json)
            .map_err(|e| Error::config(format!("grid.{path}"), format!("bad value {value}: {e}")))?;
        updated.validate()?;
        Ok(updated)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Logreg(p) => p.validate(),
            ClassifierSpec::NaiveBayes(p) => p.validate(),
            ClassifierSpec::Knn(p) => p.validate(),
            ClassifierSpec::Tree(p) => p.validate(),
            ClassifierSpec::BaggedTrees(p) => p.validate(),
            ClassifierSpec::RandomForest(p) => p.validate(),
            ClassifierSpec::Ann(p) => p.validate(),
            ClassifierSpec::Svm(p) => p.validate(),
            ClassifierSpec::Gbt(p) => p.validate(),
        }
    }

    /// Whether the learner accepts inputs with negative entries.
    pub fn accepts_negative_features(&self) -> bool {
        !matches!(self, ClassifierSpec::NaiveBayes(_))
    }

    pub fn train(&self, ts: &TrainingSet) -> Result<Model> {
        self.validate()?;
        let mut diagnostics = TrainDiagnostics::default();
        let fitted = match self {
            ClassifierSpec::Logreg(p) => {
                let m = logreg::train(ts, p)?;
                diagnostics.losses = vec![m.final_loss];
                Fitted::Logreg(m)
            }
            ClassifierSpec::NaiveBayes(p) => Fitted::NaiveBayes(naive_bayes::train(ts, p)?),
            ClassifierSpec::Knn(p) => Fitted::Knn(knn::train(ts, p)?),
            ClassifierSpec::Tree(p) => Fitted::Tree(tree::train(ts, p)?),
            ClassifierSpec::BaggedTrees(p) => Fitted::Ensemble(ensemble::train_bagged(ts, p)?),
            ClassifierSpec::RandomForest(p) => Fitted::Ensemble(ensemble::train_forest(ts, p)?),
            ClassifierSpec::Ann(p) => {
                let (m, losses) = ann::train(ts, p)?;
                diagnostics.losses = losses;
                Fitted::Ann(m)
            }
            ClassifierSpec::Svm(p) => {
                let m = svm::train(ts, p)?;
                diagnostics.warnings.extend(m.warnings());
                Fitted::Svm(m)
            }
            ClassifierSpec::Gbt(p) => {
                let m = gbt::train(ts, p)?;
                diagnostics.losses = m.losses.clone();
                Fitted::Gbt(m)
            }
        };
        Ok(Model {
            spec: self.clone(),
            n_features: ts.dim(),
            n_classes: ts.n_classes(),
            fitted,
            diagnostics,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    /// Training loss trajectory where the learner records one.
    pub losses: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Fitted {
    Logreg(LogReg),
    NaiveBayes(MultinomialNb),
    Knn(Knn),
    Tree(DecisionTree),
    Ensemble(TreeEnsemble),
    Ann(Mlp),
    Svm(SvmModel),
    Gbt(GbtModel),
}

/// A trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ClassifierSpec,
    pub n_features: usize,
    pub n_classes: usize,
    pub fitted: Fitted,
    pub diagnostics: TrainDiagnostics,
}

impl Model {
    pub fn predict(&self, x: &FeatureVector) -> Result<usize> {
        if x.dim() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.dim(),
            });
        }
        if let (Fitted::NaiveBayes(_), Some((i, v))) = (&self.fitted, x.first_negative()) {
            return Err(Error::InvalidInput(format!(
                "naive Bayes needs nonnegative features; feature {i} is {v}"
            )));
        }
        Ok(match &self.fitted {
            Fitted::Logreg(m) => m.predict(x),
            Fitted::NaiveBayes(m) => m.predict(x),
            Fitted::Knn(m) => m.predict(x),
            Fitted::Tree(m) => m.predict(x),
            Fitted::Ensemble(m) => m.predict(x),
            Fitted::Ann(m) => m.predict(x),
            Fitted::Svm(m) => m.predict(x),
            Fitted::Gbt(m) => m.predict(x),
        })
    }

    pub fn predict_all(&self, xs: &[FeatureVector]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Index of the largest score; the lowest index wins ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Majority vote; ties go to the lowest class index.
pub(crate) fn majority(votes: impl IntoIterator<Item = usize>, n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for c in 1..n_classes {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::DenseVector;

    fn dense(rows: &[&[f64]]) -> Vec<FeatureVector> {
        rows.iter().map(|r| DenseVector(r.to_vec()).into()).collect()
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::new(dense(&[&[1.0]]), vec![0, 1], 2).is_err());
        assert!(TrainingSet::new(dense(&[&[1.0], &[2.0]]), vec![0, 2], 2).is_err());
        assert!(TrainingSet::new(dense(&[&[1.0], &[2.0, 3.0]]), vec![0, 1], 2).is_err());
        assert!(TrainingSet::new(dense(&[&[1.0]]), vec![0], 2).is_err());
        assert!(TrainingSet::new(dense(&[&[f64::NAN], &[1.0]]), vec![0, 1], 2).is_err());
        let ts = TrainingSet::new(dense(&[&[1.0], &[2.0]]), vec![0, 1], 2).unwrap();
        assert_eq!(ts.class_counts(), [1, 1]);
    }

    #[test]
    fn with_param_edits_nested_fields() {
        let spec = ClassifierSpec::default_for("random-forest").unwrap();
        let edited = spec.with_param("tree.max_depth", &serde_json::json!(4)).unwrap();
        match edited {
            ClassifierSpec::RandomForest(p) => assert_eq!(p.tree.max_depth, 4),
            _ => unreachable!(),
        }
        assert!(spec.with_param("nope", &serde_json::json!(1)).is_err());
        let knn = ClassifierSpec::default_for("knn").unwrap();
        assert!(knn.with_param("k", &serde_json::json!(0)).is_err());
    }

    #[test]
    fn unknown_algorithm_is_a_config_error() {
        let err = ClassifierSpec::default_for("c5").unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Validation);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let ts = TrainingSet::new(dense(&[&[0.0], &[1.0]]), vec![0, 1], 2).unwrap();
        let m = ClassifierSpec::default_for("tree").unwrap().train(&ts).unwrap();
        let err = m.predict(&DenseVector(vec![0.0, 1.0]).into()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn tie_breaking_helpers() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(majority([0, 0, 1], 2), 0);
        assert_eq!(majority([1, 2, 2, 1], 3), 1);
    }
}
