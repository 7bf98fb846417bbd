//! Multinomial (softmax) logistic regression, full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{argmax, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2: 1e-4,
            epochs: 500,
            learning_rate: 0.1,
        }
    }
}

impl LogRegParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("classifier.l2", "must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("classifier.epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("classifier.learning_rate", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub n_classes: usize,
    pub n_features: usize,
    /// Row-major `n_classes x n_features`.
    #[serde(with = "crate::archive::blob")]
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub final_loss: f64,
}

impl LogReg {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        LogReg {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
            final_loss: f64::NAN,
        }
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        scores(&self.weights, &self.bias, self.n_features, x)
    }

    pub fn predict(&self, x: &FeatureVector) -> usize {
        argmax(&self.scores(x))
    }
}

fn scores(weights: &[f64], bias: &[f64], p: usize, x: &FeatureVector) -> Vec<f64> {
    bias.iter()
        .enumerate()
        .map(|(c, b)| b + x.dot_dense(&weights[c * p..(c + 1) * p]))
        .collect()
}

fn log_softmax_in_place(s: &mut [f64]) {
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    s.iter_mut().for_each(|v| *v -= lse);
}

/// Mean cross-entropy plus `(l2 / 2) * ||W||^2` (bias unpenalized), with
/// gradients in the layout of `weights` and `bias`.
pub fn loss_and_grad(
    features: &[FeatureVector],
    labels: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let c_count = bias.len();
    let p = weights.len() / c_count;
    let n = features.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = vec![0.0; c_count];
    let mut loss = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (x, &y) in features.iter().zip(labels) {
        let mut s = scores(weights, bias, p, x);
        log_softmax_in_place(&mut s);
        loss -= s[y] / n;
        for (c, ls) in s.iter().enumerate() {
            let e = (ls.exp() - if c == y { 1.0 } else { 0.0 }) / n;
            gb[c] += e;
            let row = &mut gw[c * p..(c + 1) * p];
            x.for_each_nonzero(|j, v| row[j] += e * v);
        }
    }
    (loss, gw, gb)
}

/// Gradient descent with step `learning_rate`, halved while a step fails to
/// decrease the objective (Armijo condition).
pub fn train(ts: &TrainingSet, hp: &LogRegParams) -> Result<LogReg> {
    let (c, p) = (ts.n_classes(), ts.dim());
    let mut model = LogReg::zeros(c, p);
    let (mut loss, mut gw, mut gb) =
        loss_and_grad(ts.features(), ts.labels(), &model.weights, &model.bias, hp.l2);
    if !loss.is_finite() {
        return Err(Error::Numeric("logistic loss is not finite".into()));
    }
    for _ in 0..hp.epochs {
        let grad_sq: f64 = gw.iter().chain(&gb).map(|g| g * g).sum();
        if grad_sq < 1e-24 {
            break;
        }
        let mut step = hp.learning_rate;
        let accepted = loop {
            let w: Vec<f64> = model.weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let b: Vec<f64> = model.bias.iter().zip(&gb).map(|(b, g)| b - step * g).collect();
            let (l, nw, nb) = loss_and_grad(ts.features(), ts.labels(), &w, &b, hp.l2);
            if l.is_finite() && l <= loss - 1e-4 * step * grad_sq {
                break Some((w, b, l, nw, nb));
            }
            step *= 0.5;
            if step < hp.learning_rate * 1e-10 {
                break None;
            }
        };
        let Some((w, b, l, nw, nb)) = accepted else { break };
        model.weights = w;
        model.bias = b;
        loss = l;
        gw = nw;
        gb = nb;
    }
    if !loss.is_finite() {
        return Err(Error::Numeric(
            "logistic loss diverged; reduce the learning rate".into(),
        ));
    }
    model.final_loss = loss;
    Ok(model)
}
