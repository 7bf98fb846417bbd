//! GloVe: weighted least squares over log co-occurrence counts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_word_list, EmbeddingTable};
use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};

/// Symmetric distance-weighted co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceCounts {
    words: Vec<String>,
    entries: BTreeMap<(u32, u32), f64>,
}

impl CooccurrenceCounts {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn id(&self, w: &str) -> Option<u32> {
        self.words.iter().position(|x| x == w).map(|i| i as u32)
    }

    /// `X[a][b]`, zero when the pair never co-occurs.
    pub fn get(&self, a: &str, b: &str) -> f64 {
        match (self.id(a), self.id(b)) {
            (Some(i), Some(j)) => self.entries.get(&(i, j)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .iter()
            .map(|(&(i, j), &x)| (i as usize, j as usize, x))
    }

    /// Builds counts from explicit `(i, j, x)` entries over `words`; each
    /// pair is mirrored.
    pub fn from_entries(words: Vec<String>, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(i, j, x) in entries {
            if i >= words.len() || j >= words.len() || !(x > 0.0) {
                return Err(Error::InvalidInput(format!("bad co-occurrence entry ({i}, {j}, {x})")));
            }
            map.insert((i as u32, j as u32), x);
            map.insert((j as u32, i as u32), x);
        }
        Ok(CooccurrenceCounts { words, entries: map })
    }
}

/// One pass over the corpus: every pair of positions at distance
/// `k <= window` adds `1/k` to both `X[a][b]` and `X[b][a]`.
pub fn build_cooccurrence(docs: &[TokenizedDoc], window: usize) -> Result<CooccurrenceCounts> {
    if window == 0 {
        return Err(Error::config("embedding.window", "must be at least 1"));
    }
    let (words, _) = build_word_list(docs, 1);
    let index: std::collections::HashMap<&str, u32> =
        words.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let mut entries: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for doc in docs {
        let ids: Vec<u32> = doc.tokens.iter().map(|t| index[t.as_str()]).collect();
        for p in 0..ids.len() {
            for q in p + 1..ids.len().min(p + window + 1) {
                let w = 1.0 / (q - p) as f64;
                *entries.entry((ids[p], ids[q])).or_insert(0.0) += w;
                *entries.entry((ids[q], ids[p])).or_insert(0.0) += w;
            }
        }
    }
    Ok(CooccurrenceCounts { words, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum GloveStep {
    /// Per-parameter adaptive steps, accumulators starting at 1.
    AdaGrad { learning_rate: f64 },
    Fixed { learning_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GloveConfig {
    pub dim: usize,
    pub epochs: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub step: GloveStep,
    pub seed: u64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: 50,
            epochs: 600,
            x_max: 100.0,
            alpha: 0.75,
            // Small steps over many epochs; larger steps fit the noise of
            // sparse desk-scale counts.
            step: GloveStep::AdaGrad { learning_rate: 0.002 },
            seed: 1,
        }
    }
}

/// `f(x) = (x / x_max)^alpha`, capped at 1.
pub fn weighting(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x >= x_max {
        1.0
    } else {
        (x / x_max).powf(alpha)
    }
}

/// Gradients of one pair's loss term.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub word: Vec<f64>,
    pub context: Vec<f64>,
    pub word_bias: f64,
    pub context_bias: f64,
}

/// `f(x) (w . c + b_w + b_c - ln x)^2` and its gradient.
pub fn pair_loss(
    word: &[f64],
    context: &[f64],
    word_bias: f64,
    context_bias: f64,
    x: f64,
    x_max: f64,
    alpha: f64,
) -> (f64, PairGrad) {
    let fx = weighting(x, x_max, alpha);
    let diff = word.iter().zip(context).map(|(a, b)| a * b).sum::<f64>() + word_bias + context_bias
        - x.ln();
    let g = 2.0 * fx * diff;
    (
        fx * diff * diff,
        PairGrad {
            word: context.iter().map(|c| g * c).collect(),
            context: word.iter().map(|w| g * w).collect(),
            word_bias: g,
            context_bias: g,
        },
    )
}

struct Params {
    dim: usize,
    w: Vec<f64>,
    c: Vec<f64>,
    bw: Vec<f64>,
    bc: Vec<f64>,
}

impl Params {
    fn objective(&self, pairs: &[(usize, usize, f64)], x_max: f64, alpha: f64) -> f64 {
        let d = self.dim;
        pairs
            .iter()
            .map(|&(i, j, x)| {
                pair_loss(
                    &self.w[i * d..(i + 1) * d],
                    &self.c[j * d..(j + 1) * d],
                    self.bw[i],
                    self.bc[j],
                    x,
                    x_max,
                    alpha,
                )
                .0
            })
            .sum()
    }
}

/// Stochastic per-pair minimization. The recorded objective for each epoch
/// is the full weighted sum evaluated after that epoch. Final vectors are
/// `w + c`.
pub fn train_glove(cooc: &CooccurrenceCounts, config: &GloveConfig) -> Result<EmbeddingTable> {
    if cooc.is_empty() {
        return Err(Error::Data("co-occurrence matrix is empty".into()));
    }
    if config.dim == 0 || config.epochs == 0 {
        return Err(Error::config("glove", "dim and epochs must be at least 1"));
    }
    let lr = match config.step {
        GloveStep::AdaGrad { learning_rate } | GloveStep::Fixed { learning_rate } => learning_rate,
    };
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::config("glove.step.learning_rate", "must be positive and finite"));
    }
    let adaptive = matches!(config.step, GloveStep::AdaGrad { .. });
    let n = cooc.words.len();
    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut init = |len: usize| -> Vec<f64> {
        (0..len).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect()
    };
    let mut p = Params {
        dim: d,
        w: init(n * d),
        c: init(n * d),
        bw: init(n),
        bc: init(n),
    };
    let mut hist_w = vec![1.0; n * d];
    let mut hist_c = vec![1.0; n * d];
    let mut hist_bw = vec![1.0; n];
    let mut hist_bc = vec![1.0; n];

    let mut pairs: Vec<(usize, usize, f64)> = cooc.iter().collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        if adaptive {
            pairs.shuffle(&mut rng);
        }
        for &(i, j, x) in &pairs {
            let (_, g) = pair_loss(
                &p.w[i * d..(i + 1) * d],
                &p.c[j * d..(j + 1) * d],
                p.bw[i],
                p.bc[j],
                x,
                config.x_max,
                config.alpha,
            );
            let step = |param: &mut f64, hist: &mut f64, grad: f64| {
                if adaptive {
                    *param -= lr * grad / hist.sqrt();
                    *hist += grad * grad;
                } else {
                    *param -= lr * grad;
                }
            };
            for k in 0..d {
                step(&mut p.w[i * d + k], &mut hist_w[i * d + k], g.word[k]);
                step(&mut p.c[j * d + k], &mut hist_c[j * d + k], g.context[k]);
            }
            step(&mut p.bw[i], &mut hist_bw[i], g.word_bias);
            step(&mut p.bc[j], &mut hist_bc[j], g.context_bias);
        }
        let obj = p.objective(&pairs, config.x_max, config.alpha);
        if !obj.is_finite() {
            return Err(Error::Numeric("GloVe objective diverged; lower the learning rate".into()));
        }
        losses.push(obj);
    }
    let vectors = p.w.iter().zip(&p.c).map(|(a, b)| a + b).collect();
    Ok(EmbeddingTable::new(d, cooc.words.clone(), vectors, None, losses))
}
