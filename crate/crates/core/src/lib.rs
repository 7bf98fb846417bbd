//! Product-name classification pipeline.
//!
//! Short product names are tokenized ([`corpus`]), turned into numeric
//! vectors by one of nine vectorizations ([`features`], [`embeddings`]),
//! and classified by a family of supervised learners ([`classifiers`]).
//! [`evaluation`] and [`tuning`] implement the scoring, k-fold
//! cross-validation and grid-search protocol, and [`pipeline`] ties the
//! stages together behind a declarative config and a versioned model
//! archive ([`archive`]).

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod classifiers;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod pipeline;
pub mod synth;
pub mod surrogate;
pub mod tuning;
pub mod vector;

pub use classifiers::{ClassifierSpec, Model, TrainingSet};
pub use corpus::{FoldPlan, LabelDictionary, RawRecord, TokenizedDoc, TokenizerConfig};
pub use embeddings::{EmbeddingConfig, EmbeddingTable, VectorizationKind, Vectorizer};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, EvalReport};
pub use features::Vocabulary;
pub use tuning::{CvResult, ParamGrid, RunSpec};
pub use vector::{DenseVector, FeatureVector, SparseVector};
