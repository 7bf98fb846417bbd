//! Bounded word/n-gram vocabulary with count and TF-IDF vectorization.
//!
//! `tf(t, d) = n(t, d) / sum_t' n(t', d)` over every term of the expanded
//! document (out-of-vocabulary terms included), `idf(t) = ln(N / df(t))`
//! without smoothing, and `tfidf = tf * idf`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{word_ngrams, TokenizedDoc};
use crate::error::{Error, Result};
pub use crate::vector::SparseVector;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    max_features: usize,
    max_ngram: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyData {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    max_features: usize,
    max_ngram: usize,
}

impl From<VocabularyData> for Vocabulary {
    fn from(d: VocabularyData) -> Self {
        let index = d
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms: d.terms,
            doc_freq: d.doc_freq,
            n_docs: d.n_docs,
            max_features: d.max_features,
            max_ngram: d.max_ngram,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            terms: v.terms,
            doc_freq: v.doc_freq,
            n_docs: v.n_docs,
            max_features: v.max_features,
            max_ngram: v.max_ngram,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
            && self.doc_freq == other.doc_freq
            && self.n_docs == other.n_docs
            && self.max_features == other.max_features
            && self.max_ngram == other.max_ngram
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn max_ngram(&self) -> usize {
        self.max_ngram
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i] as usize)
    }

    fn idf_at(&self, index: usize) -> f64 {
        (self.n_docs as f64 / self.doc_freq[index] as f64).ln()
    }

    /// The n-gram expansion this vocabulary was built with.
    pub fn expand(&self, doc: &TokenizedDoc) -> Vec<String> {
        word_ngrams(&doc.tokens, self.max_ngram)
    }
}

/// Collects every word n-gram (n <= `max_ngram`) of the corpus and keeps the
/// `max_features` most frequent, ties broken lexicographically. Retained
/// terms are indexed in lexicographic order.
pub fn build_vocabulary(
    docs: &[TokenizedDoc],
    max_features: usize,
    max_ngram: usize,
) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::Data("cannot build a vocabulary from zero documents".into()));
    }
    if max_features == 0 {
        return Err(Error::config("vectorizer.max_features", "must be at least 1"));
    }
    if max_ngram == 0 {
        return Err(Error::config("vectorizer.max_ngram", "must be at least 1"));
    }
    // term -> (total count, document frequency)
    let mut stats: HashMap<String, (u64, u32)> = HashMap::new();
    for doc in docs {
        let terms = word_ngrams(&doc.tokens, max_ngram);
        let mut seen: HashMap<&str, ()> = HashMap::with_capacity(terms.len());
        for term in &terms {
            let first = seen.insert(term.as_str(), ()).is_none();
            let entry = stats.entry(term.clone()).or_insert((0, 0));
            entry.0 += 1;
            if first {
                entry.1 += 1;
            }
        }
    }
    let mut ranked: Vec<(String, u64, u32)> =
        stats.into_iter().map(|(t, (c, d))| (t, c, d)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    ranked.sort_by(|a, b| a.0.cmp(&b.0));

    let (terms, doc_freq): (Vec<String>, Vec<u32>) =
        ranked.into_iter().map(|(t, _, d)| (t, d)).unzip();
    Ok(Vocabulary::from(VocabularyData {
        terms,
        doc_freq,
        n_docs: docs.len(),
        max_features,
        max_ngram,
    }))
}

fn in_vocab_counts(terms: &[String], vocab: &Vocabulary) -> BTreeMap<usize, u32> {
    let mut counts = BTreeMap::new();
    for t in terms {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    counts
}

/// Occurrence counts of the document's in-vocabulary terms.
pub fn count_vectorize(doc: &TokenizedDoc, vocab: &Vocabulary) -> SparseVector {
    let terms = vocab.expand(doc);
    let pairs = in_vocab_counts(&terms, vocab)
        .into_iter()
        .map(|(i, c)| (i, c as f64))
        .collect();
    SparseVector::from_pairs(vocab.len(), pairs).expect("indices within vocabulary")
}

/// Normalized frequency of `term` within an expanded term list.
pub fn tf(term: &str, doc_terms: &[String]) -> Result<f64> {
    if doc_terms.is_empty() {
        return Err(Error::InvalidInput("term frequency of an empty document".into()));
    }
    let n = doc_terms.iter().filter(|t| t.as_str() == term).count();
    Ok(n as f64 / doc_terms.len() as f64)
}

/// Natural-log inverse document frequency of an in-vocabulary term.
pub fn idf(term: &str, vocab: &Vocabulary) -> Result<f64> {
    vocab
        .index_of(term)
        .map(|i| vocab.idf_at(i))
        .ok_or_else(|| Error::InvalidInput(format!("term `{term}` is not in the vocabulary")))
}

pub fn tfidf_vectorize(doc: &TokenizedDoc, vocab: &Vocabulary) -> SparseVector {
    let terms = vocab.expand(doc);
    if terms.is_empty() {
        return SparseVector::zeros(vocab.len());
    }
    let total = terms.len() as f64;
    let pairs = in_vocab_counts(&terms, vocab)
        .into_iter()
        .map(|(i, c)| (i, (c as f64 / total) * vocab.idf_at(i)))
        .collect();
    SparseVector::from_pairs(vocab.len(), pairs).expect("indices within vocabulary")
}
