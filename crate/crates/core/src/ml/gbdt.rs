//! Binary gradient-boosted regression trees on the logistic loss.
//!
//! Trees grow level by level with exact greedy splits: every threshold is the
//! midpoint between two adjacent distinct values present in a node, and
//! `x <= threshold` goes left. Leaf weights are Newton steps
//! `-G / (H + lambda)` scaled by the learning rate, which is folded into the
//! stored leaf values.
//!
//! Split ties: features are scanned in the order given and thresholds in
//! ascending order; a candidate replaces the current best only when its gain
//! exceeds it by more than `1e-12 * max(1, |best|)`. A split needs a gain above
//! that margin over zero.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum training rows on each side of a split.
    pub min_samples_leaf: usize,
    pub lambda: f64,
    /// Fraction of rows drawn without replacement for each tree.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            lambda: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::Invalid(format!(
                "learning rate {} outside [0, 1]",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Invalid(format!("subsample {} outside (0, 1]", self.subsample)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Invalid("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of `y` under raw score `raw`.
pub fn logistic_loss(y: bool, raw: f64) -> f64 {
    // log(1 + e^raw) - y * raw, computed without overflow
    let softplus = raw.max(0.0) + (-raw.abs()).exp().ln_1p();
    softplus - if y { raw } else { 0.0 }
}

/// First and second derivative of [`logistic_loss`] in `raw`.
pub fn logistic_grad_hess(y: bool, raw: f64) -> (f64, f64) {
    let p = sigmoid(raw);
    (p - if y { 1.0 } else { 0.0 }, p * (1.0 - p))
}

/// Column-major features with each column reduced to its sorted distinct
/// values plus a per-row index into them.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    columns: Vec<BinnedColumn>,
}

#[derive(Debug, Clone)]
struct BinnedColumn {
    values: Vec<f64>,
    bins: Vec<u32>,
}

impl BinnedMatrix {
    /// Rows must all have the same width and contain no NaN.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let columns = (0..width)
            .map(|j| {
                let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                let bins = rows
                    .iter()
                    .map(|r| values.partition_point(|&v| v < r[j]) as u32)
                    .collect();
                BinnedColumn { values, bins }
            })
            .collect();
        Self {
            n_rows: rows.len(),
            columns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    fn value(&self, feature: usize, row: usize) -> f64 {
        let c = &self.columns[feature];
        c.values[c.bins[row] as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.walk(|f| x[f])
    }

    fn walk(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if value(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    /// Log-odds before any tree.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Width of the rows the model was trained on.
    pub n_features: usize,
}

impl GbdtModel {
    /// A tree-less model predicting `p` everywhere.
    pub fn constant(p: f64, n_features: usize) -> Self {
        Self {
            base_score: (p / (1.0 - p)).ln(),
            learning_rate: 0.0,
            trees: Vec::new(),
            n_features,
        }
    }

    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_raw(x))
    }

    /// Total split gain per feature.
    pub fn feature_gains(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_features];
        for node in self.trees.iter().flat_map(|t| &t.nodes) {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature] += gain;
            }
        }
        gains
    }
}

/// Trains on every feature of `x`.
pub fn train(x: &BinnedMatrix, y: &[bool], params: &GbdtParams) -> Result<GbdtModel> {
    let features: Vec<usize> = (0..x.n_features()).collect();
    train_on(x, &features, y, params).map(|(m, _)| m)
}

/// Like [`train`] but also returns the mean training loss before the first
/// round and after each round.
pub fn train_traced(x: &BinnedMatrix, y: &[bool], params: &GbdtParams) -> Result<(GbdtModel, Vec<f64>)> {
    let features: Vec<usize> = (0..x.n_features()).collect();
    train_on(x, &features, y, params)
}

/// Trains using only the listed columns of `x`. Node feature ids refer to
/// columns of `x`.
pub fn train_on(
    x: &BinnedMatrix,
    features: &[usize],
    y: &[bool],
    params: &GbdtParams,
) -> Result<(GbdtModel, Vec<f64>)> {
    params.check()?;
    if features.is_empty() {
        return Err(Error::NoFeatures);
    }
    if y.len() != x.n_rows() {
        return Err(Error::Invalid(format!("{} labels for {} rows", y.len(), x.n_rows())));
    }
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    // written as a difference of logs so that flipping labels negates it exactly
    let base_score = (pos as f64).ln() - (neg as f64).ln();

    let n = y.len();
    let mut raw = vec![base_score; n];
    let mean_loss = |raw: &[f64]| raw.iter().zip(y).map(|(&r, &t)| logistic_loss(t, r)).sum::<f64>() / n as f64;
    let mut trace = vec![mean_loss(&raw)];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sample_size = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    let mut trees = Vec::with_capacity(params.rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..params.rounds {
        for i in 0..n {
            (grad[i], hess[i]) = logistic_grad_hess(y[i], raw[i]);
        }
        let rows: Vec<usize> = if sample_size < n {
            let mut r = sample(&mut rng, n, sample_size).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let tree = grow_tree(x, features, &rows, &grad, &hess, params);
        for (i, r) in raw.iter_mut().enumerate() {
            *r += tree.walk(|f| x.value(f, i));
        }
        trace.push(mean_loss(&raw));
        trees.push(tree);
    }
    Ok((
        GbdtModel {
            base_score,
            learning_rate: params.learning_rate,
            trees,
            n_features: x.n_features(),
        },
        trace,
    ))
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Stats,
}

enum Building {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf(Stats),
}

fn better(gain: f64, best: f64) -> bool {
    gain > best + 1e-12 * best.abs().max(1.0)
}

pub(crate) fn split_gain(left: (f64, f64), right: (f64, f64), lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    let (g, h) = (left.0 + right.0, left.1 + right.1);
    0.5 * (score(left.0, left.1) + score(right.0, right.1) - score(g, h))
}

fn grow_tree(
    x: &BinnedMatrix,
    features: &[usize],
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> Tree {
    const NONE: u32 = u32::MAX;
    let mut building: Vec<Building> = Vec::new();
    let mut slot = vec![NONE; x.n_rows()];
    let mut root = Stats { g: 0.0, h: 0.0, n: 0 };
    for &r in rows {
        slot[r] = 0;
        root.g += grad[r];
        root.h += hess[r];
        root.n += 1;
    }
    // (node index in `building`, stats) for nodes still open at this level
    let mut open: Vec<(usize, Stats)> = vec![(0, root)];
    building.push(Building::Leaf(root));

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
        for &f in features {
            let col = &x.columns[f];
            let nb = col.values.len();
            let mut hist = vec![(0.0f64, 0.0f64, 0usize); open.len() * nb];
            for &r in rows {
                let s = slot[r];
                if s != NONE {
                    let cell = &mut hist[s as usize * nb + col.bins[r] as usize];
                    cell.0 += grad[r];
                    cell.1 += hess[r];
                    cell.2 += 1;
                }
            }
            for (k, &(_, total)) in open.iter().enumerate() {
                let mut left = Stats { g: 0.0, h: 0.0, n: 0 };
                let mut prev: Option<usize> = None;
                for b in 0..nb {
                    let (g, h, cnt) = hist[k * nb + b];
                    if cnt == 0 {
                        continue;
                    }
                    if let Some(p) = prev {
                        let right_n = total.n - left.n;
                        if left.n >= params.min_samples_leaf && right_n >= params.min_samples_leaf {
                            let gain =
                                split_gain((left.g, left.h), (total.g - left.g, total.h - left.h), params.lambda);
                            let current = best[k].map_or(0.0, |c| c.gain);
                            if better(gain, current) {
                                best[k] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    threshold: (col.values[p] + col.values[b]) / 2.0,
                                    left,
                                });
                            }
                        }
                    }
                    left.g += g;
                    left.h += h;
                    left.n += cnt;
                    prev = Some(b);
                }
            }
        }

        // open-node slot -> (left child slot, right child slot)
        let mut next_open = Vec::new();
        let mut routes: Vec<Option<(u32, u32, usize, f64)>> = vec![None; open.len()];
        for (k, &(node, total)) in open.iter().enumerate() {
            let Some(c) = best[k] else { continue };
            let right = Stats {
                g: total.g - c.left.g,
                h: total.h - c.left.h,
                n: total.n - c.left.n,
            };
            let li = building.len();
            building.push(Building::Leaf(c.left));
            building.push(Building::Leaf(right));
            building[node] = Building::Split {
                feature: c.feature,
                threshold: c.threshold,
                gain: c.gain,
                left: li,
                right: li + 1,
            };
            let ls = next_open.len() as u32;
            next_open.push((li, c.left));
            next_open.push((li + 1, right));
            routes[k] = Some((ls, ls + 1, c.feature, c.threshold));
        }
        for &r in rows {
            let s = slot[r];
            if s == NONE {
                continue;
            }
            slot[r] = match routes[s as usize] {
                Some((l, rt, f, t)) => {
                    if x.value(f, r) <= t {
                        l
                    } else {
                        rt
                    }
                }
                None => NONE,
            };
        }
        open = next_open;
    }

    // re-emit in pre-order with final leaf weights
    fn emit(building: &[Building], i: usize, params: &GbdtParams, out: &mut Vec<Node>) -> usize {
        let at = out.len();
        match &building[i] {
            Building::Leaf(s) => {
                let w = -s.g / (s.h + params.lambda) * params.learning_rate;
                out.push(Node::Leaf { value: w });
            }
            Building::Split {
                feature,
                threshold,
                gain,
                left,
                right,
            } => {
                out.push(Node::Leaf { value: 0.0 });
                let l = emit(building, *left, params, out);
                let r = emit(building, *right, params, out);
                out[at] = Node::Split {
                    feature: *feature,
                    threshold: *threshold,
                    gain: *gain,
                    left: l,
                    right: r,
                };
            }
        }
        at
    }
    let mut nodes = Vec::with_capacity(building.len());
    emit(&building, 0, params, &mut nodes);
    Tree { nodes }
}
