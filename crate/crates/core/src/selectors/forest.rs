use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SelectorError;
use crate::seed::{derive_seed, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification { n_classes: usize },
    Regression,
}

/// Candidate features per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(p))` for classification, `ceil(p / 3)` for regression.
    Auto,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, task: Task, p: usize) -> usize {
        let m = match self {
            MaxFeatures::Auto => match task {
                Task::Classification { .. } => (p as f64).sqrt().ceil() as usize,
                Task::Regression => p.div_ceil(3),
            },
            MaxFeatures::All => p,
            MaxFeatures::Count(m) => m,
        };
        m.clamp(1, p.max(1))
    }
}

/// Random forest hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSpec {
    pub trees: usize,
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec { trees: 100, max_features: MaxFeatures::Auto, min_leaf: 1, max_depth: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Bagged CART trees; classification predicts by majority vote, regression by mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    task: Task,
    features: usize,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn task(&self) -> Task {
        self.task
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// Class index (as `f64`) or regression value.
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.task {
            Task::Classification { n_classes } => {
                let mut votes = vec![0usize; n_classes];
                for t in &self.trees {
                    votes[t.predict(row) as usize] += 1;
                }
                // Ties go to the lowest class index.
                let best = votes.iter().copied().max().unwrap_or(0);
                votes.iter().position(|&v| v == best).unwrap_or(0) as f64
            }
            Task::Regression => self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64,
        }
    }
}

/// Fits a forest; class targets are indices in `0..n_classes` stored as `f64`.
pub fn rf_fit(
    rows: &[Vec<f64>],
    targets: &[f64],
    task: Task,
    spec: &ForestSpec,
    seed: u64,
) -> Result<RandomForest, SelectorError> {
    if rows.is_empty() {
        return Err(SelectorError::EmptyTrainingData);
    }
    if rows.len() != targets.len() {
        return Err(SelectorError::LengthMismatch { rows: rows.len(), targets: targets.len() });
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(SelectorError::RaggedRows);
    }
    if let Task::Classification { n_classes } = task {
        if targets.iter().any(|&t| t < 0.0 || t.fract() != 0.0 || t as usize >= n_classes) {
            return Err(SelectorError::BadClassLabel);
        }
    }
    if targets.iter().any(|t| !t.is_finite()) || rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SelectorError::NonFinite);
    }
    let spec = ForestSpec { trees: spec.trees.max(1), min_leaf: spec.min_leaf.max(1), ..*spec };
    let mtry = spec.max_features.resolve(task, p);
    let trees = (0..spec.trees)
        .map(|t| {
            let mut r = rng(derive_seed(seed, &[t as u64]));
            let sample: Vec<usize> = (0..rows.len()).map(|_| r.random_range(0..rows.len())).collect();
            let mut builder = Builder { rows, targets, task, spec: &spec, mtry, rng: r, nodes: Vec::new() };
            builder.grow(sample, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Ok(RandomForest { task, features: p, trees })
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    task: Task,
    spec: &'a ForestSpec,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        match self.task {
            Task::Classification { n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &i in idx {
                    counts[self.targets[i] as usize] += 1;
                }
                let best = counts.iter().copied().max().unwrap_or(0);
                counts.iter().position(|&c| c == best).unwrap_or(0) as f64
            }
            Task::Regression => idx.iter().map(|&i| self.targets[i]).sum::<f64>() / idx.len() as f64,
        }
    }

    fn pure(&self, idx: &[usize]) -> bool {
        let first = self.targets[idx[0]];
        idx.iter().all(|&i| self.targets[i] == first)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(&idx)));
        let depth_ok = self.spec.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || idx.len() < 2 * self.spec.min_leaf || self.pure(&idx) {
            return at;
        }
        let Some(c) = self.best_split(&idx) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][c.feature] <= c.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split { feature: c.feature, threshold: c.threshold, left, right };
        at
    }

    /// Best split over `mtry` random features; if none of them admits a valid split,
    /// the remaining features are tried in random order. Zero-gain splits are allowed.
    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let p = self.rows[0].len();
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<Candidate> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(c) = self.best_split_on(idx, f) {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_split_on(&self, idx: &[usize], feature: usize) -> Option<Candidate> {
        let mut sorted: Vec<usize> = idx.to_vec();
        sorted.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
        let n = sorted.len();
        let min_leaf = self.spec.min_leaf;
        let value = |k: usize| self.rows[sorted[k]][feature];
        let mut best: Option<Candidate> = None;
        match self.task {
            Task::Classification { n_classes } => {
                let mut right = vec![0f64; n_classes];
                for &i in &sorted {
                    right[self.targets[i] as usize] += 1.0;
                }
                let parent = gini(&right, n as f64);
                let mut left = vec![0f64; n_classes];
                for k in 0..n - 1 {
                    let c = self.targets[sorted[k]] as usize;
                    left[c] += 1.0;
                    right[c] -= 1.0;
                    let nl = k + 1;
                    if nl < min_leaf || n - nl < min_leaf || value(k) == value(k + 1) {
                        continue;
                    }
                    let (fl, fr) = (nl as f64, (n - nl) as f64);
                    let gain = parent - (fl * gini(&left, fl) + fr * gini(&right, fr)) / n as f64;
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Candidate { gain, feature, threshold: midpoint(value(k), value(k + 1)) });
                    }
                }
            }
            Task::Regression => {
                let (mut sr, mut qr) = (0.0, 0.0);
                for &i in &sorted {
                    sr += self.targets[i];
                    qr += self.targets[i] * self.targets[i];
                }
                let parent = qr - sr * sr / n as f64;
                let (mut sl, mut ql) = (0.0, 0.0);
                for k in 0..n - 1 {
                    let y = self.targets[sorted[k]];
                    sl += y;
                    ql += y * y;
                    sr -= y;
                    qr -= y * y;
                    let nl = k + 1;
                    if nl < min_leaf || n - nl < min_leaf || value(k) == value(k + 1) {
                        continue;
                    }
                    let (fl, fr) = (nl as f64, (n - nl) as f64);
                    let sse = (ql - sl * sl / fl) + (qr - sr * sr / fr);
                    let gain = (parent - sse) / n as f64;
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Candidate { gain, feature, threshold: midpoint(value(k), value(k + 1)) });
                    }
                }
            }
        }
        best
    }
}

fn gini(counts: &[f64], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

/// Threshold between two distinct sorted values that cannot round onto the upper one.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}
