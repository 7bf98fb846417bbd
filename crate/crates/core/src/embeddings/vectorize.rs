use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    build_cooccurrence, embed_doc_avg, embed_doc_normalized_avg, embed_doc_sum, train_fasttext,
    train_glove, train_word2vec, EmbeddingConfig, EmbeddingTable, GloveConfig, SubwordConfig,
    TrainingMode,
};
use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};
use crate::features::{build_vocabulary, count_vectorize, tfidf_vectorize, Vocabulary};
use crate::vector::FeatureVector;

/// The nine document vectorizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum VectorizationKind {
    Count,
    TfIdf,
    W2vCbowSum,
    W2vCbowAvg,
    W2vSkipGramSum,
    W2vSkipGramAvg,
    FastTextCbow,
    FastTextSkipGram,
    GloveSum,
}

impl VectorizationKind {
    pub const ALL: [VectorizationKind; 9] = [
        VectorizationKind::Count,
        VectorizationKind::TfIdf,
        VectorizationKind::W2vCbowSum,
        VectorizationKind::W2vCbowAvg,
        VectorizationKind::W2vSkipGramSum,
        VectorizationKind::W2vSkipGramAvg,
        VectorizationKind::FastTextCbow,
        VectorizationKind::FastTextSkipGram,
        VectorizationKind::GloveSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VectorizationKind::Count => "count",
            VectorizationKind::TfIdf => "tfidf",
            VectorizationKind::W2vCbowSum => "w2v-cbow-sum",
            VectorizationKind::W2vCbowAvg => "w2v-cbow-avg",
            VectorizationKind::W2vSkipGramSum => "w2v-sg-sum",
            VectorizationKind::W2vSkipGramAvg => "w2v-sg-avg",
            VectorizationKind::FastTextCbow => "fasttext-cbow",
            VectorizationKind::FastTextSkipGram => "fasttext-sg",
            VectorizationKind::GloveSum => "glove-sum",
        }
    }

    /// Count and TF-IDF produce sparse, nonnegative vectors.
    pub fn is_sparse(self) -> bool {
        matches!(self, VectorizationKind::Count | VectorizationKind::TfIdf)
    }
}

impl fmt::Display for VectorizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VectorizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VectorizationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = VectorizationKind::ALL.iter().map(|k| k.name()).collect();
                Error::config(
                    "vectorizer.kind",
                    format!("unknown kind `{s}` (expected one of {})", known.join(", ")),
                )
            })
    }
}

impl TryFrom<String> for VectorizationKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<VectorizationKind> for String {
    fn from(k: VectorizationKind) -> String {
        k.name().to_string()
    }
}

/// Parameters of every vectorization family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerParams {
    pub max_features: usize,
    pub max_ngram: usize,
    /// Word2Vec and FastText settings; `mode` is overridden by the kind.
    pub embedding: EmbeddingConfig,
    pub subword: SubwordConfig,
    pub glove: GloveConfig,
}

impl Default for VectorizerParams {
    fn default() -> Self {
        VectorizerParams {
            max_features: 3000,
            max_ngram: 3,
            embedding: EmbeddingConfig::default(),
            subword: SubwordConfig::default(),
            glove: GloveConfig::default(),
        }
    }
}

impl VectorizerParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::config("vectorizer.max_features", "must be at least 1"));
        }
        if self.max_ngram == 0 {
            return Err(Error::config("vectorizer.max_ngram", "must be at least 1"));
        }
        self.embedding.validate()?;
        self.subword.validate()?;
        if self.glove.dim == 0 || self.glove.epochs == 0 {
            return Err(Error::config("vectorizer.glove", "dim and epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Fitted vectorization artifacts; each field is present only if some kind
/// that needs it was fitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub vocabulary: Option<Vocabulary>,
    pub w2v_cbow: Option<EmbeddingTable>,
    pub w2v_skipgram: Option<EmbeddingTable>,
    pub fasttext_cbow: Option<EmbeddingTable>,
    pub fasttext_skipgram: Option<EmbeddingTable>,
    pub glove: Option<EmbeddingTable>,
}

impl Artifacts {
    /// Fits whatever the listed kinds need, each artifact once.
    pub fn fit(kinds: &[VectorizationKind], params: &VectorizerParams, docs: &[TokenizedDoc]) -> Result<Self> {
        use VectorizationKind::*;
        params.validate()?;
        let mut a = Artifacts::default();
        let with_mode = |mode| EmbeddingConfig {
            mode,
            ..params.embedding.clone()
        };
        for &kind in kinds {
            match kind {
                Count | TfIdf if a.vocabulary.is_none() => {
                    a.vocabulary = Some(build_vocabulary(docs, params.max_features, params.max_ngram)?);
                }
                W2vCbowSum | W2vCbowAvg if a.w2v_cbow.is_none() => {
                    a.w2v_cbow = Some(train_word2vec(docs, &with_mode(TrainingMode::Cbow))?);
                }
                W2vSkipGramSum | W2vSkipGramAvg if a.w2v_skipgram.is_none() => {
                    a.w2v_skipgram = Some(train_word2vec(docs, &with_mode(TrainingMode::SkipGram))?);
                }
                FastTextCbow if a.fasttext_cbow.is_none() => {
                    a.fasttext_cbow =
                        Some(train_fasttext(docs, &with_mode(TrainingMode::Cbow), &params.subword)?);
                }
                FastTextSkipGram if a.fasttext_skipgram.is_none() => {
                    a.fasttext_skipgram = Some(train_fasttext(
                        docs,
                        &with_mode(TrainingMode::SkipGram),
                        &params.subword,
                    )?);
                }
                GloveSum if a.glove.is_none() => {
                    let cooc = build_cooccurrence(docs, params.embedding.window)?;
                    a.glove = Some(train_glove(&cooc, &params.glove)?);
                }
                _ => {}
            }
        }
        Ok(a)
    }
}

/// Vectorizes one document with the artifact `kind` needs.
pub fn vectorize(doc: &TokenizedDoc, kind: VectorizationKind, artifacts: &Artifacts) -> Result<FeatureVector> {
    use VectorizationKind::*;
    fn need(t: &Option<EmbeddingTable>, kind: VectorizationKind) -> Result<&EmbeddingTable> {
        t.as_ref().ok_or_else(|| Error::Unfitted(kind.to_string()))
    }
    let v: FeatureVector = match kind {
        Count | TfIdf => {
            let vocab = artifacts
                .vocabulary
                .as_ref()
                .ok_or_else(|| Error::Unfitted(kind.to_string()))?;
            if kind == Count {
                count_vectorize(doc, vocab).into()
            } else {
                tfidf_vectorize(doc, vocab).into()
            }
        }
        W2vCbowSum => embed_doc_sum(doc, need(&artifacts.w2v_cbow, kind)?).into(),
        W2vCbowAvg => embed_doc_avg(doc, need(&artifacts.w2v_cbow, kind)?).into(),
        W2vSkipGramSum => embed_doc_sum(doc, need(&artifacts.w2v_skipgram, kind)?).into(),
        W2vSkipGramAvg => embed_doc_avg(doc, need(&artifacts.w2v_skipgram, kind)?).into(),
        FastTextCbow => embed_doc_normalized_avg(doc, need(&artifacts.fasttext_cbow, kind)?).into(),
        FastTextSkipGram => embed_doc_normalized_avg(doc, need(&artifacts.fasttext_skipgram, kind)?).into(),
        GloveSum => embed_doc_sum(doc, need(&artifacts.glove, kind)?).into(),
    };
    Ok(v)
}

/// A vectorization of one kind, fitted and ready to transform documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    pub kind: VectorizationKind,
    pub artifacts: Artifacts,
}

impl Vectorizer {
    pub fn fit(kind: VectorizationKind, params: &VectorizerParams, docs: &[TokenizedDoc]) -> Result<Self> {
        Ok(Vectorizer {
            kind,
            artifacts: Artifacts::fit(&[kind], params, docs)?,
        })
    }

    /// Restricts shared artifacts to what `kind` uses.
    pub fn from_artifacts(kind: VectorizationKind, all: &Artifacts) -> Result<Self> {
        use VectorizationKind::*;
        let mut a = Artifacts::default();
        match kind {
            Count | TfIdf => a.vocabulary = all.vocabulary.clone(),
            W2vCbowSum | W2vCbowAvg => a.w2v_cbow = all.w2v_cbow.clone(),
            W2vSkipGramSum | W2vSkipGramAvg => a.w2v_skipgram = all.w2v_skipgram.clone(),
            FastTextCbow => a.fasttext_cbow = all.fasttext_cbow.clone(),
            FastTextSkipGram => a.fasttext_skipgram = all.fasttext_skipgram.clone(),
            GloveSum => a.glove = all.glove.clone(),
        }
        let v = Vectorizer { kind, artifacts: a };
        v.dim()?;
        Ok(v)
    }

    pub fn transform(&self, doc: &TokenizedDoc) -> Result<FeatureVector> {
        vectorize(doc, self.kind, &self.artifacts)
    }

    pub fn transform_all(&self, docs: &[TokenizedDoc]) -> Result<Vec<FeatureVector>> {
        docs.iter().map(|d| self.transform(d)).collect()
    }

    pub fn dim(&self) -> Result<usize> {
        let probe = TokenizedDoc {
            tokens: vec![],
            label: 0,
        };
        Ok(self.transform(&probe)?.dim())
    }

    /// The embedding table behind this vectorizer, if it is embedding-based.
    pub fn table(&self) -> Option<&EmbeddingTable> {
        let a = &self.artifacts;
        a.w2v_cbow
            .as_ref()
            .or(a.w2v_skipgram.as_ref())
            .or(a.fasttext_cbow.as_ref())
            .or(a.fasttext_skipgram.as_ref())
            .or(a.glove.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str]) -> TokenizedDoc {
        TokenizedDoc {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label: 0,
        }
    }

    fn corpus() -> Vec<TokenizedDoc> {
        (0..30)
            .map(|i| match i % 3 {
                0 => doc(&["lapte", "zuzu", "1l"]),
                1 => doc(&["paine", "alba", "500g"]),
                _ => doc(&["apa", "plata", "2l"]),
            })
            .collect()
    }

    fn small_params() -> VectorizerParams {
        VectorizerParams {
            embedding: EmbeddingConfig {
                epochs: 2,
                ..Default::default()
            },
            glove: GloveConfig {
                epochs: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in VectorizationKind::ALL {
            assert_eq!(k.name().parse::<VectorizationKind>().unwrap(), k);
        }
        assert!("bert".parse::<VectorizationKind>().is_err());
    }

    #[test]
    fn dispatch_identity_and_dimensions() {
        let docs = corpus();
        let params = small_params();
        let art = Artifacts::fit(&VectorizationKind::ALL, &params, &docs).unwrap();
        let d = doc(&["lapte", "zuzu"]);

        let vocab = art.vocabulary.as_ref().unwrap();
        assert_eq!(
            vectorize(&d, VectorizationKind::TfIdf, &art).unwrap(),
            FeatureVector::from(tfidf_vectorize(&d, vocab))
        );
        assert_eq!(
            vectorize(&d, VectorizationKind::GloveSum, &art).unwrap(),
            FeatureVector::from(embed_doc_sum(&d, art.glove.as_ref().unwrap()))
        );
        for k in VectorizationKind::ALL {
            let dim = vectorize(&d, k, &art).unwrap().dim();
            if k.is_sparse() {
                assert!(dim <= 3000);
            } else {
                assert_eq!(dim, 50, "{k}");
            }
        }
    }

    #[test]
    fn unfitted_kind_is_named() {
        let art = Artifacts::fit(&[VectorizationKind::Count], &small_params(), &corpus()).unwrap();
        let err = vectorize(&doc(&["a"]), VectorizationKind::FastTextSkipGram, &art).unwrap_err();
        assert!(err.to_string().contains("fasttext-sg"));
    }
}
