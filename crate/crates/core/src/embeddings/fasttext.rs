//! Subword (character n-gram) embeddings.
//!
//! A word is represented by its own vector plus the mean of the vectors of
//! the hashed character n-grams of `<word>`. Buckets never touched during
//! training keep a deterministic seed-derived initialization, so only the
//! trained buckets are stored and every string still has a vector.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::word2vec::{encode_sentences, train_loop, uniform_init, InputSpace};
use super::{build_word_list, EmbeddingConfig, EmbeddingTable};
use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubwordConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub buckets: u32,
}

impl Default for SubwordConfig {
    fn default() -> Self {
        SubwordConfig {
            n_min: 3,
            n_max: 6,
            buckets: 1 << 18,
        }
    }
}

impl SubwordConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::config(
                "subword.n_min",
                format!("need 1 <= n_min <= n_max, got {}..{}", self.n_min, self.n_max),
            ));
        }
        if self.buckets == 0 {
            return Err(Error::config("subword.buckets", "must be at least 1"));
        }
        Ok(())
    }
}

/// Character n-grams of `<word>` for n in `n_min..=n_max`, shortest first.
pub fn char_ngrams(word: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in n_min.max(1)..=n_max.min(chars.len()) {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

/// 32-bit FNV-1a over the UTF-8 bytes.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in s.as_bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "SubwordData", into = "SubwordData")]
pub struct SubwordTable {
    config: SubwordConfig,
    init_seed: u64,
    trained_ids: Vec<u32>,
    trained: Vec<f64>,
    dim: usize,
    slot: HashMap<u32, usize>,
}

#[derive(Serialize, Deserialize)]
struct SubwordData {
    config: SubwordConfig,
    init_seed: u64,
    dim: usize,
    trained_ids: Vec<u32>,
    #[serde(with = "crate::archive::blob")]
    trained: Vec<f64>,
}

impl From<SubwordData> for SubwordTable {
    fn from(d: SubwordData) -> Self {
        let slot = d.trained_ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        SubwordTable {
            config: d.config,
            init_seed: d.init_seed,
            trained_ids: d.trained_ids,
            trained: d.trained,
            dim: d.dim,
            slot,
        }
    }
}

impl From<SubwordTable> for SubwordData {
    fn from(t: SubwordTable) -> Self {
        SubwordData {
            config: t.config,
            init_seed: t.init_seed,
            dim: t.dim,
            trained_ids: t.trained_ids,
            trained: t.trained,
        }
    }
}

impl PartialEq for SubwordTable {
    fn eq(&self, o: &Self) -> bool {
        self.config == o.config
            && self.init_seed == o.init_seed
            && self.dim == o.dim
            && self.trained_ids == o.trained_ids
            && self.trained == o.trained
    }
}

fn bucket_init(seed: u64, bucket: u32, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(bucket));
    let bound = 0.5 / dim as f64;
    (0..dim).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl SubwordTable {
    pub fn config(&self) -> &SubwordConfig {
        &self.config
    }

    pub fn buckets_of(&self, word: &str) -> Vec<u32> {
        char_ngrams(word, self.config.n_min, self.config.n_max)
            .iter()
            .map(|g| fnv1a(g) % self.config.buckets)
            .collect()
    }

    pub fn bucket_vector(&self, bucket: u32) -> Vec<f64> {
        match self.slot.get(&bucket) {
            Some(&i) => self.trained[i * self.dim..(i + 1) * self.dim].to_vec(),
            None => bucket_init(self.init_seed, bucket, self.dim),
        }
    }

    /// Mean of the word's bucket vectors; zero if it has no n-grams.
    pub fn mean_bucket_vector(&self, word: &str, dim: usize) -> Vec<f64> {
        let buckets = self.buckets_of(word);
        let mut out = vec![0.0; dim];
        if buckets.is_empty() {
            return out;
        }
        for b in &buckets {
            out.iter_mut()
                .zip(self.bucket_vector(*b))
                .for_each(|(a, v)| *a += v);
        }
        out.iter_mut().for_each(|a| *a /= buckets.len() as f64);
        out
    }
}

struct SubwordInputs {
    dim: usize,
    words: Vec<f64>,
    buckets: Vec<f64>,
    /// Local bucket slots per word id.
    word_buckets: Vec<Vec<usize>>,
}

impl InputSpace for SubwordInputs {
    fn compose(&self, word: usize, out: &mut [f64]) {
        let dim = self.dim;
        out.copy_from_slice(&self.words[word * dim..(word + 1) * dim]);
        let slots = &self.word_buckets[word];
        if slots.is_empty() {
            return;
        }
        let inv = 1.0 / slots.len() as f64;
        for &s in slots {
            let row = &self.buckets[s * dim..(s + 1) * dim];
            out.iter_mut().zip(row).for_each(|(o, b)| *o += inv * b);
        }
    }

    fn add(&mut self, word: usize, delta: &[f64], scale: f64) {
        let dim = self.dim;
        let row = &mut self.words[word * dim..(word + 1) * dim];
        row.iter_mut().zip(delta).for_each(|(p, d)| *p += scale * d);
        let slots = &self.word_buckets[word];
        if slots.is_empty() {
            return;
        }
        let s = scale / slots.len() as f64;
        for &slot in slots {
            let row = &mut self.buckets[slot * dim..(slot + 1) * dim];
            row.iter_mut().zip(delta).for_each(|(p, d)| *p += s * d);
        }
    }
}

pub fn train_fasttext(
    docs: &[TokenizedDoc],
    config: &EmbeddingConfig,
    subword: &SubwordConfig,
) -> Result<EmbeddingTable> {
    config.validate()?;
    subword.validate()?;
    let (words, counts) = build_word_list(docs, config.min_count);
    if words.is_empty() {
        return Err(Error::Data(format!(
            "no word occurs at least {} times; nothing to train",
            config.min_count
        )));
    }
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init_seed: u64 = rng.gen();
    let word_vectors = uniform_init(&mut rng, words.len(), dim);

    let mut table = SubwordTable {
        config: *subword,
        init_seed,
        trained_ids: Vec::new(),
        trained: Vec::new(),
        dim,
        slot: HashMap::new(),
    };
    let mut word_buckets = Vec::with_capacity(words.len());
    for w in &words {
        let mut slots = Vec::new();
        for b in table.buckets_of(w) {
            let next = table.trained_ids.len();
            let slot = *table.slot.entry(b).or_insert(next);
            if slot == next {
                table.trained_ids.push(b);
                table.trained.extend(bucket_init(init_seed, b, dim));
            }
            slots.push(slot);
        }
        word_buckets.push(slots);
    }

    let mut inputs = SubwordInputs {
        dim,
        words: word_vectors,
        buckets: std::mem::take(&mut table.trained),
        word_buckets,
    };
    let sentences = encode_sentences(docs, &words);
    let losses = train_loop(&sentences, &counts, &mut inputs, config, &mut rng)?;
    table.trained = inputs.buckets;
    Ok(EmbeddingTable::new(dim, words, inputs.words, Some(table), losses))
}
