//! Kernel support vector machines: SMO on the C-SVC dual, one-vs-one voting
//! for more than two classes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{majority, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

/// Curvature used when a pair's second derivative is not positive, as
/// happens with the sigmoid kernel.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kernel {
    /// `exp(-gamma ||x - z||^2)`; gamma defaults to `1 / p`.
    Radial {
        #[serde(default)]
        gamma: Option<f64>,
    },
    /// `tanh(gamma x.z + coef0)`; gamma defaults to `1 / p`.
    Sigmoid {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        coef0: f64,
    },
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Radial { .. } => "radial",
            Kernel::Sigmoid { .. } => "sigmoid",
        }
    }

    fn gamma(&self) -> Option<f64> {
        match *self {
            Kernel::Radial { gamma } | Kernel::Sigmoid { gamma, .. } => gamma,
        }
    }

    /// Kernel value with `gamma` already resolved.
    pub fn eval(&self, gamma: f64, x: &FeatureVector, z: &FeatureVector) -> f64 {
        match *self {
            Kernel::Radial { .. } => (-gamma * x.squared_distance(z)).exp(),
            Kernel::Sigmoid { coef0, .. } => (gamma * x.dot(z) + coef0).tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Radial { gamma: None },
            c: 1.0,
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("classifier.c", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("classifier.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("classifier.max_iter", "must be at least 1"));
        }
        if let Some(g) = self.kernel.gamma() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config("classifier.kernel.gamma", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Dual solution of one binary problem with labels `y_i = +-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO with maximal-violating-pair selection. `k` is the row-major `n x n`
/// kernel matrix. Stops when the largest KKT gap falls below `tol`.
pub fn solve_binary(k: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> BinarySolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            let open = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if open && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let (mut j, mut gmax2) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            let open = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if open && y[t] * grad[t] > gmax2 {
                gmax2 = y[t] * grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let qij = y[i] * y[j] * k[i * n + j];
        let (kii, kjj) = (k[i * n + i], k[j * n + j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kii + kjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[t * n + i] * di + y[j] * k[t * n + j] * dj);
        }
    }
    let rho = compute_rho(y, &alpha, &grad, c);
    BinarySolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Mean of `y_i G_i` over free variables, else the midpoint of the feasible
/// interval.
fn compute_rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Largest violation of the KKT conditions of `alpha` with decision values
/// `f_i = sum_j alpha_j y_j K_ij - rho`.
pub fn kkt_violation(k: &[f64], y: &[f64], alpha: &[f64], rho: f64, c: f64) -> f64 {
    let n = y.len();
    (0..n)
        .map(|i| {
            let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[i * n + j]).sum::<f64>() - rho;
            let m = y[i] * f;
            if alpha[i] <= 0.0 {
                (1.0 - m).max(0.0)
            } else if alpha[i] >= c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    /// `(positive, negative)` classes; positive decisions vote for the first.
    pub classes: (usize, usize),
    /// Indices into [`SvmModel::support`].
    pub support: Vec<u32>,
    /// `alpha_i y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub n_classes: usize,
    pub support: Vec<FeatureVector>,
    pub machines: Vec<BinaryMachine>,
}

impl SvmModel {
    pub fn decision_values(&self, x: &FeatureVector) -> Vec<f64> {
        let kx: Vec<f64> = self
            .support
            .iter()
            .map(|s| self.kernel.eval(self.gamma, s, x))
            .collect();
        self.machines
            .iter()
            .map(|m| {
                m.support
                    .iter()
                    .zip(&m.coef)
                    .map(|(&s, a)| a * kx[s as usize])
                    .sum::<f64>()
                    - m.rho
            })
            .collect()
    }

    /// Pairwise vote; ties go to the lowest class index.
    pub fn predict(&self, x: &FeatureVector) -> usize {
        let votes = self
            .machines
            .iter()
            .zip(self.decision_values(x))
            .map(|(m, f)| if f > 0.0 { m.classes.0 } else { m.classes.1 });
        majority(votes, self.n_classes)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.machines
            .iter()
            .filter(|m| !m.converged)
            .map(|m| {
                format!(
                    "svm machine {} vs {} stopped at max_iter ({}) before meeting tol",
                    m.classes.0, m.classes.1, m.iterations
                )
            })
            .collect()
    }
}

pub fn train(ts: &TrainingSet, hp: &SvmParams) -> Result<SvmModel> {
    hp.validate()?;
    let n = ts.len();
    let gamma = hp.kernel.gamma().unwrap_or(1.0 / ts.dim() as f64);
    let xs = ts.features();
    let gram: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (0..n).map(move |j| hp.kernel.eval(gamma, &xs[i], &xs[j])))
        .collect();
    let counts = ts.class_counts();
    let pairs: Vec<(usize, usize)> = (0..ts.n_classes())
        .flat_map(|a| (a + 1..ts.n_classes()).map(move |b| (a, b)))
        .filter(|&(a, b)| counts[a] > 0 && counts[b] > 0)
        .collect();
    let solved: Vec<(usize, usize, Vec<usize>, BinarySolution)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let idx: Vec<usize> = (0..n)
                .filter(|&i| ts.labels()[i] == a || ts.labels()[i] == b)
                .collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if ts.labels()[i] == a { 1.0 } else { -1.0 })
                .collect();
            let m = idx.len();
            let mut k = vec![0.0; m * m];
            for (r, &i) in idx.iter().enumerate() {
                for (s, &j) in idx.iter().enumerate() {
                    k[r * m + s] = gram[i * n + j];
                }
            }
            let sol = solve_binary(&k, &y, hp.c, hp.tol, hp.max_iter);
            (a, b, idx, sol)
        })
        .collect();

    let mut slot = vec![u32::MAX; n];
    let mut support = Vec::new();
    let mut machines = Vec::with_capacity(solved.len());
    for (a, b, idx, sol) in solved {
        let mut sv = Vec::new();
        let mut coef = Vec::new();
        for (r, &i) in idx.iter().enumerate() {
            if sol.alpha[r] > 0.0 {
                if slot[i] == u32::MAX {
                    slot[i] = support.len() as u32;
                    support.push(xs[i].clone());
                }
                sv.push(slot[i]);
                coef.push(sol.alpha[r] * if ts.labels()[i] == a { 1.0 } else { -1.0 });
            }
        }
        machines.push(BinaryMachine {
            classes: (a, b),
            support: sv,
            coef,
            rho: sol.rho,
            iterations: sol.iterations,
            converged: sol.converged,
        });
    }
    if machines.is_empty() {
        return Err(Error::Data("svm needs at least two populated classes".into()));
    }
    Ok(SvmModel {
        kernel: hp.kernel,
        gamma,
        n_classes: ts.n_classes(),
        support,
        machines,
    })
}
