//! Binary decision trees and the split-search engine shared with the
//! ensembles and gradient boosting.
//!
//! Trees grow level by level. Each feature column holds only its nonzero
//! entries, sorted by value; the zero entries of a node are folded in as one
//! block at value 0, so sparse inputs cost time proportional to their
//! nonzeros. A sample goes left when `x[feature] <= threshold`.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, TrainingSet};
use crate::error::{Error, Result};
use crate::vector::FeatureVector;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Gini,
    InfoGain,
    GainRatio,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::InfoGain => "info-gain",
            Criterion::GainRatio => "gain-ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: 30,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::config("classifier.min_samples_leaf", "must be at least 1"));
        }
        Ok(())
    }
}

/// `1 - sum p_c^2` over class weights.
pub fn gini(counts: &[f64]) -> f64 {
    let w: f64 = counts.iter().sum();
    if w <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / w) * (c / w)).sum::<f64>()
}

/// Shannon entropy in bits over class weights.
pub fn entropy(counts: &[f64]) -> f64 {
    let w: f64 = counts.iter().sum();
    if w <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|c| (c / w) * (c / w).log2())
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "node")]
pub enum Node<L> {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: L,
    },
}

/// Flat binary tree; node 0 is the root. `weight` and `score` hold each
/// node's training weight and impurity (or boosting score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
    pub weight: Vec<f64>,
    pub score: Vec<f64>,
}

impl<L> Tree<L> {
    pub fn leaf_index(&self, x: &FeatureVector) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x.get(*feature as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn value(&self, x: &FeatureVector) -> &L {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go<L>(t: &Tree<L>, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, *left as usize).max(go(t, *right as usize))
                }
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Per-sample statistics and split scoring for one kind of tree.
/// `stats[0]` is always the summed sample weight.
pub(crate) trait SplitTask {
    type Leaf;
    fn width(&self) -> usize;
    fn add(&self, sample: usize, weight: f64, acc: &mut [f64]);
    fn is_pure(&self, stats: &[f64]) -> bool;
    fn node_score(&self, stats: &[f64]) -> f64;
    fn gain(&self, left: &[f64], right: &[f64], parent: &[f64], parent_score: f64) -> f64;
    /// When `Some`, splits are ranked by `gain / split_info` among the
    /// candidates whose gain is at least the node's average gain (C4.5).
    fn split_info(&self, _left: &[f64], _right: &[f64], _parent: &[f64]) -> Option<f64> {
        None
    }
    /// A node splits only when its best gain exceeds this.
    fn min_gain(&self) -> f64;
    fn leaf(&self, stats: &[f64]) -> Self::Leaf;
}

/// Feature columns of nonzero `(value, sample)` entries sorted by value.
pub(crate) struct Columns<'a> {
    features: &'a [FeatureVector],
    cols: Vec<Vec<(f64, u32)>>,
}

impl<'a> Columns<'a> {
    pub(crate) fn new(features: &'a [FeatureVector]) -> Self {
        let dim = features.first().map_or(0, |x| x.dim());
        let mut cols = vec![Vec::new(); dim];
        for (s, x) in features.iter().enumerate() {
            x.for_each_nonzero(|j, v| {
                if v != 0.0 {
                    cols[j].push((v, s as u32));
                }
            });
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Columns { features, cols }
    }

    fn dim(&self) -> usize {
        self.cols.len()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Scratch state for scanning one level of the tree.
struct Level<'t, T: SplitTask> {
    task: &'t T,
    width: usize,
    min_leaf: f64,
    total: Vec<f64>,
    parent_score: Vec<f64>,
    nz: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    last: Vec<f64>,
    has_last: Vec<bool>,
    zero_done: Vec<bool>,
    mark: Vec<bool>,
    best: Vec<Option<Candidate>>,
    /// Gain-ratio candidates per node: `(candidate with plain gain, split info)`.
    pool: Vec<Vec<(Candidate, f64)>>,
}

impl<T: SplitTask> Level<'_, T> {
    fn reset(&mut self, t: usize) {
        let w = self.width;
        self.nz[t * w..(t + 1) * w].fill(0.0);
        self.left[t * w..(t + 1) * w].fill(0.0);
        self.has_last[t] = false;
        self.zero_done[t] = false;
    }

    /// Evaluates the threshold between the previous value group and `v`.
    fn consider(&mut self, t: usize, v: f64, feature: usize) {
        if !self.has_last[t] || v <= self.last[t] {
            return;
        }
        let w = self.width;
        let l = &self.left[t * w..(t + 1) * w];
        let tot = &self.total[t * w..(t + 1) * w];
        if l[0] < self.min_leaf || tot[0] - l[0] < self.min_leaf {
            return;
        }
        for k in 0..w {
            self.right[k] = tot[k] - l[k];
        }
        let gain = self.task.gain(l, &self.right, tot, self.parent_score[t]);
        if !gain.is_finite() {
            return;
        }
        let split_info = self.task.split_info(l, &self.right, tot);
        if split_info.is_none() && self.best[t].is_some_and(|b| gain <= b.gain) {
            return;
        }
        let prev = self.last[t];
        let mut threshold = prev + (v - prev) / 2.0;
        if threshold >= v {
            threshold = prev;
        }
        let c = Candidate {
            gain,
            feature,
            threshold,
        };
        match split_info {
            Some(si) => self.pool[t].push((c, si)),
            None => self.best[t] = Some(c),
        }
    }

    /// Picks each node's gain-ratio winner from its pooled candidates.
    fn resolve_pools(&mut self) {
        for (best, pool) in self.best.iter_mut().zip(&self.pool) {
            if pool.is_empty() {
                continue;
            }
            let mean = pool.iter().map(|(c, _)| c.gain).sum::<f64>() / pool.len() as f64;
            let floor = mean - 1e-12 * mean.abs().max(1.0);
            for (c, si) in pool.iter().filter(|(c, _)| c.gain >= floor) {
                let ratio = c.gain / si;
                if ratio.is_finite() && best.is_none_or(|b| ratio > b.gain) {
                    *best = Some(Candidate { gain: ratio, ..*c });
                }
            }
        }
    }

    fn insert_zero(&mut self, t: usize, feature: usize) {
        self.zero_done[t] = true;
        let w = self.width;
        if self.total[t * w] - self.nz[t * w] <= 1e-9 {
            return;
        }
        self.consider(t, 0.0, feature);
        for k in 0..w {
            self.left[t * w + k] += self.total[t * w + k] - self.nz[t * w + k];
        }
        self.last[t] = 0.0;
        self.has_last[t] = true;
    }
}

/// Grows one tree. Samples with zero weight take no part. `mtry` draws a
/// fresh feature subset per node. Returns the tree and each sample's leaf
/// (`u32::MAX` for zero-weight samples).
pub(crate) fn grow<T: SplitTask>(
    cols: &Columns,
    task: &T,
    weights: &[f64],
    gp: &GrowParams,
    mut mtry: Option<(usize, &mut ChaCha8Rng)>,
) -> (Tree<T::Leaf>, Vec<u32>) {
    let n = weights.len();
    let p = cols.dim();
    let width = task.width();
    let mut node_of = vec![NONE; n];
    let mut root = vec![0.0; width];
    for s in 0..n {
        if weights[s] > 0.0 {
            node_of[s] = 0;
            task.add(s, weights[s], &mut root);
        }
    }
    let root_score = task.node_score(&root);
    let mut tree = Tree {
        nodes: vec![Node::Leaf {
            value: task.leaf(&root),
        }],
        weight: vec![root[0]],
        score: vec![root_score],
    };
    let mut lo = 0usize;
    let mut depth = 0usize;
    let mut total = root;
    let mut parent_score = vec![root_score];

    while depth < gp.max_depth {
        let m = tree.nodes.len() - lo;
        let splittable: Vec<bool> = (0..m)
            .map(|t| {
                let st = &total[t * width..(t + 1) * width];
                st[0] >= 2.0 * gp.min_samples_leaf && !task.is_pure(st)
            })
            .collect();
        if !splittable.iter().any(|&b| b) {
            break;
        }
        let words = p.div_ceil(64);
        let allowed: Option<Vec<u64>> = match mtry.as_mut() {
            Some((k, rng)) if *k < p => {
                let mut bits = vec![0u64; m * words];
                for t in (0..m).filter(|&t| splittable[t]) {
                    for j in index::sample(&mut **rng, p, *k) {
                        bits[t * words + j / 64] |= 1 << (j % 64);
                    }
                }
                Some(bits)
            }
            _ => None,
        };
        let active = |t: usize, j: usize| {
            splittable[t]
                && allowed
                    .as_ref()
                    .is_none_or(|b| b[t * words + j / 64] >> (j % 64) & 1 == 1)
        };

        let mut lv = Level {
            task,
            width,
            min_leaf: gp.min_samples_leaf,
            total,
            parent_score,
            nz: vec![0.0; m * width],
            left: vec![0.0; m * width],
            right: vec![0.0; width],
            last: vec![0.0; m],
            has_last: vec![false; m],
            zero_done: vec![false; m],
            mark: vec![false; m],
            best: vec![None; m],
            pool: vec![Vec::new(); m],
        };
        let mut touched = Vec::new();
        for (j, col) in cols.cols.iter().enumerate() {
            touched.clear();
            for &(_, s) in col {
                let id = node_of[s as usize];
                if id == NONE || (id as usize) < lo {
                    continue;
                }
                let t = id as usize - lo;
                if !lv.mark[t] {
                    if !active(t, j) {
                        continue;
                    }
                    lv.mark[t] = true;
                    touched.push(t);
                    lv.reset(t);
                }
                task.add(s as usize, weights[s as usize], &mut lv.nz[t * width..(t + 1) * width]);
            }
            for &(v, s) in col {
                let id = node_of[s as usize];
                if id == NONE || (id as usize) < lo || !lv.mark[id as usize - lo] {
                    continue;
                }
                let t = id as usize - lo;
                if v > 0.0 && !lv.zero_done[t] {
                    lv.insert_zero(t, j);
                }
                lv.consider(t, v, j);
                task.add(s as usize, weights[s as usize], &mut lv.left[t * width..(t + 1) * width]);
                lv.last[t] = v;
                lv.has_last[t] = true;
            }
            for &t in &touched {
                if !lv.zero_done[t] {
                    lv.insert_zero(t, j);
                }
                lv.mark[t] = false;
            }
        }
        lv.resolve_pools();

        let base = tree.nodes.len();
        let mut split_of: Vec<Option<(usize, f64, usize)>> = vec![None; m];
        let mut next = base;
        for t in 0..m {
            if let Some(c) = lv.best[t] {
                if c.gain > task.min_gain() {
                    split_of[t] = Some((c.feature, c.threshold, next));
                    next += 2;
                }
            }
        }
        if next == base {
            break;
        }
        let mut child = vec![0.0; (next - base) * width];
        for s in 0..n {
            let id = node_of[s];
            if id == NONE || (id as usize) < lo {
                continue;
            }
            if let Some((f, thr, l)) = split_of[id as usize - lo] {
                let c = if cols.features[s].get(f) <= thr { l } else { l + 1 };
                node_of[s] = c as u32;
                task.add(s, weights[s], &mut child[(c - base) * width..(c - base + 1) * width]);
            }
        }
        for (t, split) in split_of.iter().enumerate() {
            if let Some((f, thr, l)) = *split {
                tree.nodes[lo + t] = Node::Split {
                    feature: f as u32,
                    threshold: thr,
                    left: l as u32,
                    right: l as u32 + 1,
                };
            }
        }
        parent_score = Vec::with_capacity(next - base);
        for st in child.chunks(width) {
            let score = task.node_score(st);
            tree.nodes.push(Node::Leaf {
                value: task.leaf(st),
            });
            tree.weight.push(st[0]);
            tree.score.push(score);
            parent_score.push(score);
        }
        total = child;
        lo = base;
        depth += 1;
    }
    (tree, node_of)
}

pub(crate) struct ClassTask<'a> {
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub criterion: Criterion,
}

impl SplitTask for ClassTask<'_> {
    type Leaf = usize;

    fn width(&self) -> usize {
        1 + self.n_classes
    }

    fn add(&self, sample: usize, weight: f64, acc: &mut [f64]) {
        acc[0] += weight;
        acc[1 + self.labels[sample]] += weight;
    }

    fn is_pure(&self, stats: &[f64]) -> bool {
        stats[1..].iter().filter(|&&c| c > 0.0).count() <= 1
    }

    fn node_score(&self, stats: &[f64]) -> f64 {
        match self.criterion {
            Criterion::Gini => gini(&stats[1..]),
            Criterion::InfoGain | Criterion::GainRatio => entropy(&stats[1..]),
        }
    }

    fn gain(&self, left: &[f64], right: &[f64], parent: &[f64], parent_score: f64) -> f64 {
        let (wl, wr) = (left[0] / parent[0], right[0] / parent[0]);
        parent_score - wl * self.node_score(left) - wr * self.node_score(right)
    }

    fn split_info(&self, left: &[f64], right: &[f64], parent: &[f64]) -> Option<f64> {
        if self.criterion != Criterion::GainRatio {
            return None;
        }
        let (wl, wr) = (left[0] / parent[0], right[0] / parent[0]);
        Some(-(wl * wl.log2() + wr * wr.log2()))
    }

    fn min_gain(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn leaf(&self, stats: &[f64]) -> usize {
        argmax(&stats[1..])
    }
}

/// Classification tree; leaves hold their majority class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_classes: usize,
    pub tree: Tree<usize>,
}

impl DecisionTree {
    pub fn predict(&self, x: &FeatureVector) -> usize {
        *self.tree.value(x)
    }

    /// Feature and threshold of the root split, if the root splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature as usize, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

pub fn train(ts: &TrainingSet, hp: &TreeParams) -> Result<DecisionTree> {
    hp.validate()?;
    let cols = Columns::new(ts.features());
    Ok(train_weighted(&cols, ts, hp, &vec![1.0; ts.len()], None))
}

pub(crate) fn train_weighted(
    cols: &Columns,
    ts: &TrainingSet,
    hp: &TreeParams,
    weights: &[f64],
    mtry: Option<(usize, &mut ChaCha8Rng)>,
) -> DecisionTree {
    let task = ClassTask {
        labels: ts.labels(),
        n_classes: ts.n_classes(),
        criterion: hp.criterion,
    };
    let gp = GrowParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf as f64,
    };
    let (tree, _) = grow(cols, &task, weights, &gp, mtry);
    DecisionTree {
        n_classes: ts.n_classes(),
        tree,
    }
}
