//! k-fold cross-validation and exhaustive grid search.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{ClassifierSpec, Model, TrainingSet};
use crate::corpus::{FoldPlan, TokenizedDoc};
use crate::embeddings::{VectorizationKind, Vectorizer, VectorizerParams};
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;

/// One complete configuration: vectorization, classifier and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub vectorization: VectorizationKind,
    pub vectorizer: VectorizerParams,
    pub classifier: ClassifierSpec,
    pub seed: u64,
}

impl RunSpec {
    /// Builds a spec whose embedding and classifier seeds all derive from
    /// `seed`.
    pub fn new(
        vectorization: VectorizationKind,
        mut vectorizer: VectorizerParams,
        classifier: ClassifierSpec,
        seed: u64,
    ) -> Self {
        vectorizer.embedding.seed = seed;
        vectorizer.glove.seed = seed;
        let classifier = classifier
            .with_param("seed", &Value::from(seed))
            .unwrap_or(classifier);
        RunSpec {
            vectorization,
            vectorizer,
            classifier,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vectorizer.validate()?;
        self.classifier.validate()?;
        if !self.vectorization.is_sparse() && !self.classifier.accepts_negative_features() {
            return Err(Error::config(
                "classifier.algorithm",
                format!(
                    "{} needs nonnegative features and cannot use {} vectors",
                    self.classifier.algorithm(),
                    self.vectorization
                ),
            ));
        }
        Ok(())
    }

    /// e.g. `svm(radial) + tfidf`.
    pub fn label(&self) -> String {
        format!("{} + {}", self.classifier.label(), self.vectorization)
    }
}

/// Fitted vectorizer and classifier from one training subset.
#[derive(Debug, Clone)]
pub struct Fit {
    pub vectorizer: Vectorizer,
    pub model: Model,
}

impl Fit {
    pub fn predict(&self, docs: &[TokenizedDoc]) -> Result<Vec<usize>> {
        let xs = self.vectorizer.transform_all(docs)?;
        self.model.predict_all(&xs)
    }
}

/// Fits the vectorizer and then the classifier on `train` only.
pub fn fit(spec: &RunSpec, train: &[TokenizedDoc], n_classes: usize) -> Result<Fit> {
    let vectorizer = Vectorizer::fit(spec.vectorization, &spec.vectorizer, train)?;
    let xs = vectorizer.transform_all(train)?;
    let ts = TrainingSet::new(xs, train.iter().map(|d| d.label).collect(), n_classes)?;
    let model = spec.classifier.train(&ts)?;
    Ok(Fit { vectorizer, model })
}

pub fn fit_and_evaluate(
    spec: &RunSpec,
    train: &[TokenizedDoc],
    test: &[TokenizedDoc],
    n_classes: usize,
) -> Result<(Fit, EvalReport)> {
    let f = fit(spec, train, n_classes)?;
    let pred = f.predict(test)?;
    let truth: Vec<usize> = test.iter().map(|d| d.label).collect();
    let report = EvalReport::new(&truth, &pred, n_classes)?;
    Ok((f, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldOutcome>,
    pub accuracy: Summary,
    pub macro_f1: Summary,
    pub weighted_f1: Summary,
}

impl CvResult {
    fn from_folds(folds: Vec<FoldOutcome>) -> Self {
        let pick = |f: fn(&EvalReport) -> f64| -> Vec<f64> { folds.iter().map(|o| f(&o.report)).collect() };
        CvResult {
            accuracy: Summary::of(&pick(|r| r.accuracy)),
            macro_f1: Summary::of(&pick(|r| r.macro_f1())),
            weighted_f1: Summary::of(&pick(|r| r.weighted_f1())),
            folds,
        }
    }

    pub fn warnings(&self) -> impl Iterator<Item = &String> {
        self.folds.iter().flat_map(|f| &f.warnings)
    }
}

/// Whether independent work units run on the rayon pool. Results are the
/// same either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

fn missing_classes(docs: &[TokenizedDoc], idx: &[usize], n_classes: usize) -> Vec<usize> {
    let mut seen = vec![false; n_classes];
    for &i in idx {
        seen[docs[i].label] = true;
    }
    (0..n_classes).filter(|&c| !seen[c]).collect()
}

fn run_fold(
    spec: &RunSpec,
    docs: &[TokenizedDoc],
    n_classes: usize,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldOutcome> {
    let (train_idx, held_idx) = plan.partition(fold);
    let mut warnings = Vec::new();
    for (set, idx) in [("held-out", &held_idx), ("training", &train_idx)] {
        let missing = missing_classes(docs, idx, n_classes);
        if !missing.is_empty() {
            warnings.push(format!("fold {fold}: {set} part lacks classes {missing:?}"));
        }
    }
    let pick = |idx: &[usize]| -> Vec<TokenizedDoc> { idx.iter().map(|&i| docs[i].clone()).collect() };
    let (_, report) = fit_and_evaluate(spec, &pick(&train_idx), &pick(&held_idx), n_classes)
        .map_err(|e| e.in_stage(format!("cv fold {fold}")))?;
    Ok(FoldOutcome {
        fold,
        report,
        warnings,
    })
}

/// Refits vectorizer and classifier on the other `k - 1` folds for every
/// fold and evaluates on the held-out one.
pub fn cross_validate(
    spec: &RunSpec,
    docs: &[TokenizedDoc],
    n_classes: usize,
    plan: &FoldPlan,
    exec: Execution,
) -> Result<CvResult> {
    spec.validate()?;
    if plan.len() != docs.len() {
        return Err(Error::InvalidInput(format!(
            "fold plan covers {} records but {} were given",
            plan.len(),
            docs.len()
        )));
    }
    let folds: Result<Vec<FoldOutcome>> = match exec {
        Execution::Sequential => (0..plan.k)
            .map(|f| run_fold(spec, docs, n_classes, plan, f))
            .collect(),
        Execution::Parallel => (0..plan.k)
            .into_par_iter()
            .map(|f| run_fold(spec, docs, n_classes, plan, f))
            .collect(),
    };
    Ok(CvResult::from_folds(folds?))
}

/// Cross-validates the classifier alone on fixed feature vectors; the
/// features are not refitted per fold.
pub fn cross_validate_features(spec: &ClassifierSpec, ts: &TrainingSet, plan: &FoldPlan) -> Result<CvResult> {
    if plan.len() != ts.len() {
        return Err(Error::InvalidInput(format!(
            "fold plan covers {} records but {} were given",
            plan.len(),
            ts.len()
        )));
    }
    let folds = (0..plan.k)
        .map(|fold| {
            let (train_idx, held_idx) = plan.partition(fold);
            let model = spec.train(&ts.subset(&train_idx)?)?;
            let held = ts.subset(&held_idx)?;
            let pred = model.predict_all(held.features())?;
            Ok(FoldOutcome {
                fold,
                report: EvalReport::new(held.labels(), &pred, ts.n_classes())?,
                warnings: model.diagnostics.warnings,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e: Error| e.in_stage("cv"))?;
    Ok(CvResult::from_folds(folds))
}

/// Index of the best result: highest mean accuracy, then highest mean
/// weighted F1, then the first.
pub fn best_of<'a>(results: impl IntoIterator<Item = &'a CvResult>) -> Option<usize> {
    let mut best: Option<(usize, &CvResult)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let better = best.is_none_or(|(_, b)| {
            r.accuracy.mean > b.accuracy.mean
                || (r.accuracy.mean == b.accuracy.mean && r.weighted_f1.mean > b.weighted_f1.mean)
        });
        if better {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

/// Value lists per hyperparameter path. Points enumerate in key order with
/// the last key varying fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid(pub BTreeMap<String, Vec<Value>>);

impl ParamGrid {
    pub fn new<K: Into<String>>(axes: impl IntoIterator<Item = (K, Vec<Value>)>) -> Self {
        ParamGrid(axes.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Declared default grids for the grid-searched algorithms.
    pub fn default_for(algorithm: &str) -> Option<Self> {
        let v = |xs: &[f64]| xs.iter().map(|&x| Value::from(x)).collect::<Vec<_>>();
        let u = |xs: &[u64]| xs.iter().map(|&x| Value::from(x)).collect::<Vec<_>>();
        Some(match algorithm {
            "svm" => Self::new([("c", v(&[0.1, 1.0, 10.0])), ("kernel.gamma", v(&[0.01, 0.1, 1.0]))]),
            "knn" => Self::new([("k", u(&[1, 3, 5, 7, 9]))]),
            "ann" => Self::new([
                ("hidden_units", u(&[32, 64, 128])),
                ("learning_rate", v(&[0.01, 0.1])),
            ]),
            "gbt" => Self::new([
                ("n_rounds", u(&[50, 100])),
                ("max_depth", u(&[4, 6])),
                ("learning_rate", v(&[0.1, 0.3])),
            ]),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config("grid", "no hyperparameters listed"));
        }
        for (k, vals) in &self.0 {
            if vals.is_empty() {
                return Err(Error::config(format!("grid.{k}"), "empty value list"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<(String, Value)>> {
        let mut points = vec![Vec::new()];
        for (k, vals) in &self.0 {
            points = points
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((k.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Applies every point to `base`, validating each.
    pub fn specs(&self, base: &ClassifierSpec) -> Result<Vec<(Vec<(String, Value)>, ClassifierSpec)>> {
        self.validate()?;
        self.points()
            .into_iter()
            .map(|point| {
                let mut spec = base.clone();
                for (k, v) in &point {
                    spec = spec.with_param(k, v)?;
                }
                Ok((point, spec))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: Vec<(String, Value)>,
    pub spec: RunSpec,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    pub best: usize,
}

impl GridResult {
    pub fn best(&self) -> &GridPoint {
        &self.points[self.best]
    }
}

/// Cross-validates every grid point; the best is chosen by [`best_of`].
pub fn grid_search(
    base: &RunSpec,
    grid: &ParamGrid,
    docs: &[TokenizedDoc],
    n_classes: usize,
    plan: &FoldPlan,
    exec: Execution,
) -> Result<GridResult> {
    let specs: Vec<(Vec<(String, Value)>, RunSpec)> = grid
        .specs(&base.classifier)?
        .into_iter()
        .map(|(params, classifier)| {
            let spec = RunSpec {
                classifier,
                ..base.clone()
            };
            (params, spec)
        })
        .collect();
    for (_, s) in &specs {
        s.validate()?;
    }
    let run = |(params, spec): &(Vec<(String, Value)>, RunSpec)| -> Result<GridPoint> {
        let cv = cross_validate(spec, docs, n_classes, plan, Execution::Sequential)?;
        Ok(GridPoint {
            params: params.clone(),
            spec: spec.clone(),
            cv,
        })
    };
    let points: Result<Vec<GridPoint>> = match exec {
        Execution::Sequential => specs.iter().map(run).collect(),
        Execution::Parallel => specs.par_iter().map(run).collect(),
    };
    let points = points?;
    let best = best_of(points.iter().map(|p| &p.cv)).unwrap_or(0);
    Ok(GridResult { points, best })
}

/// One line of a cross-validation or grid run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub grid_point: Option<usize>,
    pub params: BTreeMap<String, Value>,
    pub fold: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub warnings: Vec<String>,
}

pub fn fold_records(cv: &CvResult, grid_point: Option<usize>, params: &[(String, Value)]) -> Vec<FoldRecord> {
    cv.folds
        .iter()
        .map(|f| FoldRecord {
            grid_point,
            params: params.iter().cloned().collect(),
            fold: f.fold,
            accuracy: f.report.accuracy,
            macro_f1: f.report.macro_f1(),
            weighted_f1: f.report.weighted_f1(),
            warnings: f.warnings.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn grid_enumerates_cartesian_product() {
        let g = ParamGrid::default_for("gbt").unwrap();
        assert_eq!(g.len(), 8);
        let pts = g.points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0][0].0, "learning_rate");
        assert_eq!(pts[1][2], ("n_rounds".to_string(), json!(100)));
        let unique: std::collections::BTreeSet<String> =
            pts.iter().map(|p| serde_json::to_string(p).unwrap()).collect();
        assert_eq!(unique.len(), 8);
    }

    #[test]
    fn default_svm_grid_applies() {
        let base = ClassifierSpec::default_for("svm").unwrap();
        let specs = ParamGrid::default_for("svm").unwrap().specs(&base).unwrap();
        assert_eq!(specs.len(), 9);
        for (_, s) in &specs {
            s.validate().unwrap();
        }
    }

    #[test]
    fn empty_grid_is_invalid() {
        assert!(ParamGrid::default().validate().is_err());
        assert!(ParamGrid::new([("k", vec![])]).validate().is_err());
    }

    #[test]
    fn seed_propagates() {
        let spec = RunSpec::new(
            VectorizationKind::GloveSum,
            VectorizerParams::default(),
            ClassifierSpec::default_for("random-forest").unwrap(),
            42,
        );
        assert_eq!(spec.vectorizer.embedding.seed, 42);
        match spec.classifier {
            ClassifierSpec::RandomForest(p) => assert_eq!(p.seed, 42),
            _ => unreachable!(),
        }
    }

    #[test]
    fn naive_bayes_rejects_embeddings() {
        let spec = RunSpec::new(
            VectorizationKind::W2vCbowAvg,
            VectorizerParams::default(),
            ClassifierSpec::default_for("naive-bayes").unwrap(),
            1,
        );
        assert!(spec.validate().is_err());
    }
}
