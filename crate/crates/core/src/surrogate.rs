//! Desk-scale comparison of every vectorization against every classifier on
//! a synthetic corpus: one stratified train/test split, embeddings fitted
//! once on the training part, held-out scores per configuration.
//!
//! Hyperparameters come from [`Entry`]: fixed, or chosen from a grid by
//! k-fold cross-validation on the training part's feature vectors.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{ClassifierSpec, Criterion, Kernel, Model, TrainingSet};
use crate::corpus::{ingest, make_folds, split, LabelDictionary, TokenizedDoc, TokenizerConfig};
use crate::embeddings::{Artifacts, VectorizationKind, Vectorizer, VectorizerParams};
use crate::error::Result;
use crate::evaluation::EvalReport;
use crate::synth::{generate_corpus, CorpusSpec};
use crate::tuning::{best_of, cross_validate_features, ParamGrid, RunSpec};

/// Depth bound used where trees should grow until pure.
pub const UNBOUNDED_DEPTH: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Entry {
    Fixed(ClassifierSpec),
    /// Grid point with the best cross-validated accuracy on the training part.
    Tuned { base: ClassifierSpec, grid: ParamGrid },
}

impl Entry {
    pub fn base(&self) -> &ClassifierSpec {
        match self {
            Entry::Fixed(s) | Entry::Tuned { base: s, .. } => s,
        }
    }

    /// The twelve classifier configurations of the comparison.
    pub fn standard() -> Vec<Entry> {
        let spec = |name: &str| ClassifierSpec::default_for(name).expect("known algorithm");
        let set = |s: ClassifierSpec, path: &str, v: Value| s.with_param(path, &v).expect("valid override");
        let tuned = |base: ClassifierSpec| Entry::Tuned {
            grid: ParamGrid::default_for(base.algorithm()).expect("declared grid"),
            base,
        };
        let deep = Value::from(UNBOUNDED_DEPTH);
        let mut out = vec![
            // Armijo backtracking makes a large first step safe.
            Entry::Fixed(set(spec("logreg"), "learning_rate", Value::from(10.0))),
            Entry::Fixed(spec("naive-bayes")),
            tuned(spec("knn")),
        ];
        for c in [Criterion::Gini, Criterion::InfoGain, Criterion::GainRatio] {
            let tree = set(spec("tree"), "criterion", serde_json::to_value(c).unwrap());
            out.push(Entry::Fixed(set(tree, "max_depth", deep.clone())));
        }
        for name in ["bagged-trees", "random-forest"] {
            out.push(Entry::Fixed(set(spec(name), "tree.max_depth", deep.clone())));
        }
        out.push(Entry::Fixed(spec("ann")));
        for k in [Kernel::Radial { gamma: None }, Kernel::Sigmoid { gamma: None, coef0: 0.0 }] {
            out.push(tuned(set(spec("svm"), "kernel", serde_json::to_value(k).unwrap())));
        }
        out.push(Entry::Fixed(spec("gbt")));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub corpus: CorpusSpec,
    pub tokenizer: TokenizerConfig,
    pub test_fraction: f64,
    pub seed: u64,
    pub vectorizer: VectorizerParams,
    /// Folds for grid selection.
    pub selection_folds: usize,
    pub kinds: Vec<VectorizationKind>,
    pub entries: Vec<Entry>,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            corpus: CorpusSpec::default(),
            tokenizer: TokenizerConfig::default(),
            test_fraction: 0.2,
            seed: 1,
            vectorizer: VectorizerParams::default(),
            selection_folds: 3,
            kinds: VectorizationKind::ALL.to_vec(),
            entries: Entry::standard(),
        }
    }
}

/// Held-out result of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: VectorizationKind,
    pub label: String,
    /// The trained hyperparameters.
    pub spec: ClassifierSpec,
    /// Grid points with their mean cross-validated accuracy, for tuned entries.
    pub selection: Vec<(Vec<(String, Value)>, f64)>,
    pub report: EvalReport,
    pub seconds: f64,
    pub warnings: Vec<String>,
}

/// Corpus, split and fitted embeddings shared by every row.
pub struct Prepared {
    pub labels: LabelDictionary,
    pub train: Vec<TokenizedDoc>,
    pub test: Vec<TokenizedDoc>,
    pub vectorizer_params: VectorizerParams,
    pub artifacts: Artifacts,
}

impl Protocol {
    pub fn prepare(&self) -> Result<Prepared> {
        let records = generate_corpus(&self.corpus)?;
        let ing = ingest(&records, &self.tokenizer)?;
        let labels: Vec<usize> = ing.docs.iter().map(|d| d.label).collect();
        let parts = split(&labels, self.test_fraction, self.seed, true)?;
        let pick = |idx: &[usize]| -> Vec<TokenizedDoc> { idx.iter().map(|&i| ing.docs[i].clone()).collect() };
        let (train, test) = (pick(&parts.train), pick(&parts.test));
        // RunSpec::new derives the embedding seeds from the protocol seed.
        let vectorizer_params = RunSpec::new(
            VectorizationKind::Count,
            self.vectorizer.clone(),
            ClassifierSpec::default_for("logreg")?,
            self.seed,
        )
        .vectorizer;
        let artifacts = Artifacts::fit(&self.kinds, &vectorizer_params, &train)?;
        Ok(Prepared {
            labels: ing.labels,
            train,
            test,
            vectorizer_params,
            artifacts,
        })
    }

    /// Runs every applicable (kind, entry) pair. Multinomial naive Bayes is
    /// skipped for embedding kinds. `visit` sees each row with its fitted
    /// vectorizer and model.
    pub fn run(
        &self,
        prepared: &Prepared,
        mut visit: impl FnMut(&Row, &Vectorizer, &Model) -> Result<()>,
    ) -> Result<Vec<Row>> {
        let n_classes = prepared.labels.len();
        let train_labels: Vec<usize> = prepared.train.iter().map(|d| d.label).collect();
        let truth: Vec<usize> = prepared.test.iter().map(|d| d.label).collect();
        let plan = make_folds(&train_labels, self.selection_folds, self.seed, true)?;
        let mut rows = Vec::new();
        for &kind in &self.kinds {
            let vectorizer = Vectorizer::from_artifacts(kind, &prepared.artifacts)?;
            let ts = TrainingSet::new(vectorizer.transform_all(&prepared.train)?, train_labels.clone(), n_classes)?;
            let xt = vectorizer.transform_all(&prepared.test)?;
            for entry in &self.entries {
                if !kind.is_sparse() && !entry.base().accepts_negative_features() {
                    continue;
                }
                let seeded = |s: &ClassifierSpec| {
                    RunSpec::new(kind, prepared.vectorizer_params.clone(), s.clone(), self.seed).classifier
                };
                let start = Instant::now();
                let (spec, selection) = match entry {
                    Entry::Fixed(s) => (seeded(s), Vec::new()),
                    Entry::Tuned { base, grid } => {
                        let candidates: Vec<_> = grid
                            .specs(base)?
                            .into_iter()
                            .map(|(params, s)| (params, seeded(&s)))
                            .collect();
                        let cvs = candidates
                            .iter()
                            .map(|(_, s)| cross_validate_features(s, &ts, &plan))
                            .collect::<Result<Vec<_>>>()?;
                        let best = best_of(&cvs).unwrap_or(0);
                        let selection = candidates
                            .iter()
                            .zip(&cvs)
                            .map(|((params, _), cv)| (params.clone(), cv.accuracy.mean))
                            .collect();
                        (candidates[best].1.clone(), selection)
                    }
                };
                let model = spec.train(&ts)?;
                let pred = model.predict_all(&xt)?;
                let row = Row {
                    kind,
                    label: entry.base().label(),
                    spec,
                    selection,
                    report: EvalReport::new(&truth, &pred, n_classes)?,
                    seconds: start.elapsed().as_secs_f64(),
                    warnings: model.diagnostics.warnings.clone(),
                };
                visit(&row, &vectorizer, &model)?;
                rows.push(row);
            }
        }
        Ok(rows)
    }
}
