//! CBOW and skip-gram training with a full-softmax or negative-sampling
//! output layer. The learned word vectors are the input (projection)
//! weights.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_word_list, EmbeddingConfig, EmbeddingTable, OutputLayer, TrainingMode};
use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};

/// Input-side parameters: how a word id becomes the hidden representation
/// and how a gradient on that representation is pushed back.
pub(crate) trait InputSpace {
    fn compose(&self, word: usize, out: &mut [f64]);
    /// Adds `scale * delta` to the parameters behind `word`.
    fn add(&mut self, word: usize, delta: &[f64], scale: f64);
}

pub(crate) struct PlainInputs {
    pub dim: usize,
    pub vectors: Vec<f64>,
}

impl InputSpace for PlainInputs {
    fn compose(&self, word: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.vectors[word * self.dim..(word + 1) * self.dim]);
    }

    fn add(&mut self, word: usize, delta: &[f64], scale: f64) {
        let row = &mut self.vectors[word * self.dim..(word + 1) * self.dim];
        row.iter_mut().zip(delta).for_each(|(p, d)| *p += scale * d);
    }
}

pub(crate) fn uniform_init(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<f64> {
    let bound = 0.5 / dim as f64;
    (0..n * dim).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Softmax over `scores[w] = output_w . hidden`, written into `probs`.
/// Returns `-ln probs[target]`.
pub(crate) fn softmax_forward(hidden: &[f64], output: &[f64], target: usize, probs: &mut [f64]) -> f64 {
    let dim = hidden.len();
    let mut max = f64::NEG_INFINITY;
    for (w, p) in probs.iter_mut().enumerate() {
        let row = &output[w * dim..(w + 1) * dim];
        *p = row.iter().zip(hidden).map(|(a, b)| a * b).sum();
        max = max.max(*p);
    }
    let mut z = 0.0;
    for p in probs.iter_mut() {
        *p = (*p - max).exp();
        z += *p;
    }
    let log_z = z.ln();
    let target_score = probs[target].ln();
    probs.iter_mut().for_each(|p| *p /= z);
    log_z - target_score
}

/// `d loss / d hidden = sum_w (p_w - [w == target]) output_w`.
pub(crate) fn softmax_hidden_grad(output: &[f64], probs: &[f64], target: usize, grad: &mut [f64]) {
    let dim = grad.len();
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (w, &p) in probs.iter().enumerate() {
        let e = p - if w == target { 1.0 } else { 0.0 };
        let row = &output[w * dim..(w + 1) * dim];
        grad.iter_mut().zip(row).for_each(|(g, o)| *g += e * o);
    }
}

/// Full-softmax cross-entropy of one (input, target) prediction together
/// with its gradients with respect to the hidden vector and the output
/// matrix (row-major, one row per vocabulary word).
pub fn softmax_pair_loss(hidden: &[f64], output: &[f64], target: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let dim = hidden.len();
    let n_words = output.len() / dim;
    let mut probs = vec![0.0; n_words];
    let loss = softmax_forward(hidden, output, target, &mut probs);
    let mut grad_hidden = vec![0.0; dim];
    softmax_hidden_grad(output, &probs, target, &mut grad_hidden);
    let mut grad_output = vec![0.0; output.len()];
    for (w, &p) in probs.iter().enumerate() {
        let e = p - if w == target { 1.0 } else { 0.0 };
        grad_output[w * dim..(w + 1) * dim]
            .iter_mut()
            .zip(hidden)
            .for_each(|(g, h)| *g = e * h);
    }
    (loss, grad_hidden, grad_output)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct OutputState {
    dim: usize,
    weights: Vec<f64>,
    probs: Vec<f64>,
    noise: Option<(WeightedIndex<f64>, usize)>,
}

impl OutputState {
    /// One prediction step: updates output weights and fills `grad_hidden`.
    fn step(
        &mut self,
        hidden: &[f64],
        target: usize,
        lr: f64,
        grad_hidden: &mut [f64],
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let dim = self.dim;
        match &self.noise {
            None => {
                let loss = softmax_forward(hidden, &self.weights, target, &mut self.probs);
                softmax_hidden_grad(&self.weights, &self.probs, target, grad_hidden);
                for (w, &p) in self.probs.iter().enumerate() {
                    let e = p - if w == target { 1.0 } else { 0.0 };
                    let row = &mut self.weights[w * dim..(w + 1) * dim];
                    row.iter_mut().zip(hidden).for_each(|(o, h)| *o -= lr * e * h);
                }
                loss
            }
            Some((noise, negatives)) => {
                grad_hidden.iter_mut().for_each(|g| *g = 0.0);
                let mut loss = 0.0;
                for k in 0..=*negatives {
                    let (word, label) = if k == 0 {
                        (target, 1.0)
                    } else {
                        let w = noise.sample(rng);
                        if w == target {
                            continue;
                        }
                        (w, 0.0)
                    };
                    let row = &mut self.weights[word * dim..(word + 1) * dim];
                    let score: f64 = row.iter().zip(hidden).map(|(a, b)| a * b).sum();
                    let s = sigmoid(score);
                    loss -= if label == 1.0 {
                        s.max(1e-300).ln()
                    } else {
                        (1.0 - s).max(1e-300).ln()
                    };
                    let e = s - label;
                    for ((g, o), h) in grad_hidden.iter_mut().zip(row.iter_mut()).zip(hidden) {
                        *g += e * *o;
                        *o -= lr * e * h;
                    }
                }
                loss
            }
        }
    }
}

/// Runs the CBOW or skip-gram loop over `sentences` (word ids) and returns
/// the mean loss per prediction for every epoch.
pub(crate) fn train_loop<I: InputSpace>(
    sentences: &[Vec<usize>],
    counts: &[u64],
    inputs: &mut I,
    config: &EmbeddingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let dim = config.dim;
    let n_words = counts.len();
    let noise = match config.output {
        OutputLayer::FullSoftmax => None,
        OutputLayer::NegativeSampling { negatives } => {
            let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
            let dist = WeightedIndex::new(weights)
                .map_err(|e| Error::Data(format!("noise distribution: {e}")))?;
            Some((dist, negatives))
        }
    };
    let mut output = OutputState {
        dim,
        weights: vec![0.0; n_words * dim],
        probs: vec![0.0; n_words],
        noise,
    };

    let window = config.window;
    let predictions_per_epoch: usize = sentences
        .iter()
        .map(|s| match config.mode {
            TrainingMode::SkipGram => (0..s.len())
                .map(|i| context_range(i, s.len(), window).count())
                .sum(),
            TrainingMode::Cbow => usize::from(s.len() > 1) * s.len(),
        })
        .sum();
    let total = (predictions_per_epoch * config.epochs).max(1) as f64;

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut hidden = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut done = 0usize;
    let mut losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut epoch_n = 0usize;
        for &si in &order {
            let sent = &sentences[si];
            for center in 0..sent.len() {
                match config.mode {
                    TrainingMode::SkipGram => {
                        for ctx in context_range(center, sent.len(), window) {
                            let lr = config.learning_rate * (1.0 - done as f64 / total).max(1e-4);
                            inputs.compose(sent[center], &mut hidden);
                            epoch_loss += output.step(&hidden, sent[ctx], lr, &mut grad, rng);
                            inputs.add(sent[center], &grad, -lr);
                            epoch_n += 1;
                            done += 1;
                        }
                    }
                    TrainingMode::Cbow => {
                        let n_ctx = context_range(center, sent.len(), window).count();
                        if n_ctx == 0 {
                            continue;
                        }
                        let lr = config.learning_rate * (1.0 - done as f64 / total).max(1e-4);
                        hidden.iter_mut().for_each(|h| *h = 0.0);
                        for ctx in context_range(center, sent.len(), window) {
                            inputs.compose(sent[ctx], &mut scratch);
                            hidden.iter_mut().zip(&scratch).for_each(|(h, s)| *h += s);
                        }
                        hidden.iter_mut().for_each(|h| *h /= n_ctx as f64);
                        epoch_loss += output.step(&hidden, sent[center], lr, &mut grad, rng);
                        for ctx in context_range(center, sent.len(), window) {
                            inputs.add(sent[ctx], &grad, -lr / n_ctx as f64);
                        }
                        epoch_n += 1;
                        done += 1;
                    }
                }
            }
        }
        let mean = if epoch_n > 0 {
            epoch_loss / epoch_n as f64
        } else {
            0.0
        };
        if !mean.is_finite() {
            return Err(Error::Numeric(
                "embedding loss diverged; lower the learning rate".into(),
            ));
        }
        losses.push(mean);
    }
    Ok(losses)
}

fn context_range(center: usize, len: usize, window: usize) -> impl Iterator<Item = usize> {
    let lo = center.saturating_sub(window);
    let hi = (center + window).min(len.saturating_sub(1));
    (lo..=hi).filter(move |&j| j != center && len > 0)
}

/// Word-id sentences over the retained vocabulary (filtered words dropped).
pub(crate) fn encode_sentences(docs: &[TokenizedDoc], words: &[String]) -> Vec<Vec<usize>> {
    let index: std::collections::HashMap<&str, usize> =
        words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    docs.iter()
        .map(|d| d.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect()
}

pub fn train_word2vec(docs: &[TokenizedDoc], config: &EmbeddingConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    let (words, counts) = build_word_list(docs, config.min_count);
    if words.is_empty() {
        return Err(Error::Data(format!(
            "no word occurs at least {} times; nothing to train",
            config.min_count
        )));
    }
    let sentences = encode_sentences(docs, &words);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut inputs = PlainInputs {
        dim: config.dim,
        vectors: uniform_init(&mut rng, words.len(), config.dim),
    };
    let losses = train_loop(&sentences, &counts, &mut inputs, config, &mut rng)?;
    Ok(EmbeddingTable::new(config.dim, words, inputs.vectors, None, losses))
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

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn context_ranges() {
        assert_eq!(context_range(0, 1, 4).count(), 0);
        assert_eq!(context_range(2, 5, 1).collect::<Vec<_>>(), [1, 3]);
        assert_eq!(context_range(0, 3, 4).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn single_word_docs_leave_skipgram_vectors_at_init() {
        let docs = [doc(&["a"]), doc(&["b"])];
        let cfg = EmbeddingConfig {
            epochs: 1,
            ..Default::default()
        };
        let trained = train_word2vec(&docs, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = uniform_init(&mut rng, 2, cfg.dim);
        assert_eq!(trained.stored_vector("a").unwrap(), &init[..cfg.dim]);
        assert_eq!(trained.losses(), [0.0]);
    }

    #[test]
    fn first_full_softmax_loss_is_ln_vocab() {
        let docs = [doc(&["a", "b", "c", "d", "e"])];
        let cfg = EmbeddingConfig {
            epochs: 1,
            learning_rate: 1e-9,
            ..Default::default()
        };
        let t = train_word2vec(&docs, &cfg).unwrap();
        assert!((t.losses()[0] - 5f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn min_count_filtering_can_empty_the_corpus() {
        let cfg = EmbeddingConfig {
            min_count: 3,
            ..Default::default()
        };
        assert!(matches!(
            train_word2vec(&[doc(&["a", "b"])], &cfg),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn shared_contexts_give_similar_vectors() {
        // u and v are interchangeable in every template.
        let mut docs = Vec::new();
        for i in 0..40 {
            let ctx = [["lapte", "proaspat"], ["paine", "alba"], ["apa", "plata"]][i % 3];
            docs.push(doc(&[ctx[0], "u", ctx[1]]));
            docs.push(doc(&[ctx[0], "v", ctx[1]]));
        }
        for mode in [TrainingMode::SkipGram, TrainingMode::Cbow] {
            let cfg = EmbeddingConfig {
                mode,
                epochs: 30,
                ..Default::default()
            };
            let t = train_word2vec(&docs, &cfg).unwrap();
            let c = cosine(t.stored_vector("u").unwrap(), t.stored_vector("v").unwrap());
            assert!(c > 0.9, "{mode:?}: cosine {c}");
            assert!(t.losses().iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn negative_sampling_trains_and_is_deterministic() {
        let docs: Vec<_> = (0..30)
            .map(|i| if i % 2 == 0 { doc(&["x", "u", "y"]) } else { doc(&["x", "v", "y"]) })
            .collect();
        let cfg = EmbeddingConfig {
            output: OutputLayer::NegativeSampling { negatives: 5 },
            epochs: 20,
            ..Default::default()
        };
        let a = train_word2vec(&docs, &cfg).unwrap();
        let b = train_word2vec(&docs, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.losses().last().unwrap() < &a.losses()[0]);
    }
}
