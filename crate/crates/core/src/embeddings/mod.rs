//! Word embeddings (Word2Vec, FastText, GloVe), document aggregation rules,
//! and the nine-way vectorization dispatch.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};
pub use crate::vector::DenseVector;

pub mod fasttext;
pub mod glove;
mod vectorize;
pub mod word2vec;

pub use fasttext::{train_fasttext, SubwordConfig, SubwordTable};
pub use glove::{build_cooccurrence, train_glove, CooccurrenceCounts, GloveConfig, GloveStep};
pub use vectorize::{vectorize, Artifacts, VectorizationKind, Vectorizer, VectorizerParams};
pub use word2vec::train_word2vec;

/// Zero-norm threshold for the normalized-average aggregation.
pub const NORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingMode {
    Cbow,
    SkipGram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum OutputLayer {
    FullSoftmax,
    NegativeSampling { negatives: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub mode: TrainingMode,
    pub dim: usize,
    /// Maximum distance between a center word and a context word.
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub output: OutputLayer,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            mode: TrainingMode::SkipGram,
            dim: 50,
            window: 4,
            epochs: 10,
            learning_rate: 0.05,
            min_count: 1,
            output: OutputLayer::FullSoftmax,
            seed: 1,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(Error::config(format!("embedding.{f}"), m));
        if self.dim == 0 {
            return bad("dim", "must be at least 1");
        }
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive and finite");
        }
        if let OutputLayer::NegativeSampling { negatives: 0 } = self.output {
            return bad("output.negatives", "must be at least 1");
        }
        Ok(())
    }
}

/// Learned word vectors, optionally backed by character n-gram buckets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "TableData", into = "TableData")]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    subword: Option<SubwordTable>,
    /// Per-epoch training objective.
    losses: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableData {
    dim: usize,
    words: Vec<String>,
    #[serde(with = "crate::archive::blob")]
    vectors: Vec<f64>,
    subword: Option<SubwordTable>,
    losses: Vec<f64>,
}

impl From<TableData> for EmbeddingTable {
    fn from(d: TableData) -> Self {
        EmbeddingTable::new(d.dim, d.words, d.vectors, d.subword, d.losses)
    }
}

impl From<EmbeddingTable> for TableData {
    fn from(t: EmbeddingTable) -> Self {
        TableData {
            dim: t.dim,
            words: t.words,
            vectors: t.vectors,
            subword: t.subword,
            losses: t.losses,
        }
    }
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, o: &Self) -> bool {
        self.dim == o.dim
            && self.words == o.words
            && self.vectors == o.vectors
            && self.subword == o.subword
            && self.losses == o.losses
    }
}

impl EmbeddingTable {
    pub(crate) fn new(
        dim: usize,
        words: Vec<String>,
        vectors: Vec<f64>,
        subword: Option<SubwordTable>,
        losses: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(words.len() * dim, vectors.len());
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        EmbeddingTable {
            dim,
            words,
            vectors,
            subword,
            losses,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn is_subword(&self) -> bool {
        self.subword.is_some()
    }

    pub fn subword(&self) -> Option<&SubwordTable> {
        self.subword.as_ref()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// The stored per-word vector, without any subword contribution.
    pub fn stored_vector(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Vector used for `word`. Plain tables return `None` for unknown words;
    /// subword tables always answer, composing unknown words from their
    /// character n-gram buckets alone.
    pub fn lookup(&self, word: &str) -> Option<Vec<f64>> {
        match &self.subword {
            None => self.stored_vector(word).map(<[f64]>::to_vec),
            Some(sub) => {
                let mut v = sub.mean_bucket_vector(word, self.dim);
                if let Some(stored) = self.stored_vector(word) {
                    v.iter_mut().zip(stored).for_each(|(a, b)| *a += b);
                }
                Some(v)
            }
        }
    }

    /// Writes one `word v1 ... vd` line per vocabulary word.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for w in &self.words {
            let v = self.lookup(w).expect("vocabulary word");
            write!(out, "{w}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn accumulate(doc: &TokenizedDoc, table: &EmbeddingTable) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0;
    for tok in &doc.tokens {
        if let Some(v) = table.lookup(tok) {
            sum.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            n += 1;
        }
    }
    (sum, n)
}

/// Sum of the document's word vectors (zero when none is known).
pub fn embed_doc_sum(doc: &TokenizedDoc, table: &EmbeddingTable) -> DenseVector {
    DenseVector(accumulate(doc, table).0)
}

/// Mean of the document's known word vectors (zero when none is known).
pub fn embed_doc_avg(doc: &TokenizedDoc, table: &EmbeddingTable) -> DenseVector {
    let (mut sum, n) = accumulate(doc, table);
    if n > 0 {
        sum.iter_mut().for_each(|v| *v /= n as f64);
    }
    DenseVector(sum)
}

/// Mean of the unit-normalized word vectors whose L2 norm exceeds
/// [`NORM_EPSILON`]; zero when none qualifies.
pub fn embed_doc_normalized_avg(doc: &TokenizedDoc, table: &EmbeddingTable) -> DenseVector {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0;
    for tok in &doc.tokens {
        let Some(v) = table.lookup(tok) else { continue };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > NORM_EPSILON {
            sum.iter_mut().zip(&v).for_each(|(a, b)| *a += b / norm);
            n += 1;
        }
    }
    if n > 0 {
        sum.iter_mut().for_each(|v| *v /= n as f64);
    }
    DenseVector(sum)
}

/// Word list shared by the trainers: words with at least `min_count`
/// occurrences, most frequent first, ties in lexicographic order.
pub(crate) fn build_word_list(docs: &[TokenizedDoc], min_count: usize) -> (Vec<String>, Vec<u64>) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= min_count.max(1))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().map(|(w, c)| (w.to_string(), c)).unzip()
}
