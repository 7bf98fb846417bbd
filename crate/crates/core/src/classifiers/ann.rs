//! One-hidden-layer ReLU network with a softmax output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnParams {
    pub hidden_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        AnnParams {
            hidden_units: 64,
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            l2: 1e-4,
            seed: 1,
        }
    }
}

impl AnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::config("classifier.hidden_units", "must be at least 1"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("classifier", "epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("classifier.learning_rate", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("classifier.l2", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Network weights. `w1` is `p x H` and `w2` is `H x C`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_features: usize,
    pub hidden: usize,
    pub n_classes: usize,
    #[serde(with = "crate::archive::blob")]
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    #[serde(with = "crate::archive::blob")]
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradient in the same layout as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct Backprop {
    loss: f64,
    hidden: Vec<f64>,
    d_out: Vec<f64>,
    d_hidden: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(n_features: usize, hidden: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.gen_range(-r..r)).collect()
        };
        Mlp {
            n_features,
            hidden,
            n_classes,
            w1: draw(n_features, hidden),
            b1: vec![0.0; hidden],
            w2: draw(hidden, n_classes),
            b2: vec![0.0; n_classes],
        }
    }

    fn hidden_layer(&self, x: &FeatureVector) -> Vec<f64> {
        let h = self.hidden;
        let mut z = self.b1.clone();
        x.for_each_nonzero(|j, v| {
            for (zk, w) in z.iter_mut().zip(&self.w1[j * h..(j + 1) * h]) {
                *zk += v * w;
            }
        });
        z.iter_mut().for_each(|v| *v = v.max(0.0));
        z
    }

    fn output_layer(&self, a: &[f64]) -> Vec<f64> {
        let c = self.n_classes;
        let mut o = self.b2.clone();
        for (k, &ak) in a.iter().enumerate() {
            if ak != 0.0 {
                for (oc, w) in o.iter_mut().zip(&self.w2[k * c..(k + 1) * c]) {
                    *oc += ak * w;
                }
            }
        }
        o
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        self.output_layer(&self.hidden_layer(x))
    }

    pub fn predict(&self, x: &FeatureVector) -> usize {
        argmax(&self.scores(x))
    }

    fn backprop(&self, x: &FeatureVector, y: usize) -> Backprop {
        let hidden = self.hidden_layer(x);
        let mut d_out = self.output_layer(&hidden);
        let max = d_out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + d_out.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - d_out[y];
        for (c, v) in d_out.iter_mut().enumerate() {
            *v = (*v - lse).exp() - if c == y { 1.0 } else { 0.0 };
        }
        let c = self.n_classes;
        let d_hidden = hidden
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                if a > 0.0 {
                    self.w2[k * c..(k + 1) * c]
                        .iter()
                        .zip(&d_out)
                        .map(|(w, d)| w * d)
                        .sum()
                } else {
                    0.0
                }
            })
            .collect();
        Backprop {
            loss,
            hidden,
            d_out,
            d_hidden,
        }
    }

    fn penalty(&self, l2: f64) -> f64 {
        0.5 * l2 * self.w1.iter().chain(&self.w2).map(|w| w * w).sum::<f64>()
    }

    /// Mean cross-entropy over the batch plus `(l2 / 2)(||W1||^2 + ||W2||^2)`.
    pub fn loss_and_grad(&self, features: &[FeatureVector], labels: &[usize], l2: f64) -> (f64, MlpGrad) {
        let (h, c) = (self.hidden, self.n_classes);
        let n = features.len() as f64;
        let mut g = MlpGrad {
            w1: self.w1.iter().map(|w| l2 * w).collect(),
            b1: vec![0.0; h],
            w2: self.w2.iter().map(|w| l2 * w).collect(),
            b2: vec![0.0; c],
        };
        let mut loss = self.penalty(l2);
        for (x, &y) in features.iter().zip(labels) {
            let bp = self.backprop(x, y);
            loss += bp.loss / n;
            for k in 0..h {
                g.b1[k] += bp.d_hidden[k] / n;
                for cc in 0..c {
                    g.w2[k * c + cc] += bp.hidden[k] * bp.d_out[cc] / n;
                }
            }
            for cc in 0..c {
                g.b2[cc] += bp.d_out[cc] / n;
            }
            x.for_each_nonzero(|j, v| {
                for k in 0..h {
                    g.w1[j * h + k] += v * bp.d_hidden[k] / n;
                }
            });
        }
        (loss, g)
    }
}

/// Mini-batch SGD; returns the network and the mean batch loss of each epoch.
pub fn train(ts: &TrainingSet, hp: &AnnParams) -> Result<(Mlp, Vec<f64>)> {
    hp.validate()?;
    let (p, h, c) = (ts.dim(), hp.hidden_units, ts.n_classes());
    let mut net = Mlp::init(p, h, c, hp.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..ts.len()).collect();
    let mut losses = Vec::with_capacity(hp.epochs);
    let lr = hp.learning_rate;
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(hp.batch_size) {
            let scale = lr / batch.len() as f64;
            let steps: Vec<Backprop> = batch
                .iter()
                .map(|&i| net.backprop(&ts.features()[i], ts.labels()[i]))
                .collect();
            let data_loss = steps.iter().map(|b| b.loss).sum::<f64>() / batch.len() as f64;
            epoch_loss += data_loss + net.penalty(hp.l2);
            batches += 1;
            if hp.l2 > 0.0 {
                let decay = 1.0 - lr * hp.l2;
                net.w1.iter_mut().chain(net.w2.iter_mut()).for_each(|w| *w *= decay);
            }
            for (&i, bp) in batch.iter().zip(&steps) {
                for k in 0..h {
                    net.b1[k] -= scale * bp.d_hidden[k];
                    if bp.hidden[k] != 0.0 {
                        for cc in 0..c {
                            net.w2[k * c + cc] -= scale * bp.hidden[k] * bp.d_out[cc];
                        }
                    }
                }
                for cc in 0..c {
                    net.b2[cc] -= scale * bp.d_out[cc];
                }
                let w1 = &mut net.w1;
                ts.features()[i].for_each_nonzero(|j, v| {
                    for k in 0..h {
                        w1[j * h + k] -= scale * v * bp.d_hidden[k];
                    }
                });
            }
        }
        let mean = epoch_loss / batches as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(
                "network loss is not finite; use a smaller learning rate".into(),
            ));
        }
        losses.push(mean);
    }
    Ok((net, losses))
}
