//! Baseline classifiers (k-nearest neighbours, random forest of CART trees),
//! stratified cross-validation, weighted F1 and permutation importance.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Knn {
        k_neighbors: usize,
    },
    RandomForest {
        n_trees: usize,
        /// `None` grows trees until leaves are pure.
        max_depth: Option<usize>,
        min_leaf: usize,
        /// `None` means `ceil(sqrt(d))`.
        features_per_split: Option<usize>,
    },
}

impl ModelKind {
    pub fn random_forest() -> Self {
        ModelKind::RandomForest {
            n_trees: 200,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    /// `rf`, `rf:<n_trees>`, `knn` or `knn:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let num = |v: Option<&str>, default: usize| -> Result<usize> {
            match v {
                None => Ok(default),
                Some(t) => t
                    .parse()
                    .ok()
                    .filter(|&x| x >= 1)
                    .ok_or_else(|| Error::Parameter(format!("bad model argument `{t}`"))),
            }
        };
        match name {
            "rf" | "random_forest" => {
                let mut m = Self::random_forest();
                if let ModelKind::RandomForest { n_trees, .. } = &mut m {
                    *n_trees = num(arg, 200)?;
                }
                Ok(m)
            }
            "knn" => Ok(ModelKind::Knn {
                k_neighbors: num(arg, 5)?,
            }),
            _ => Err(Error::Parameter(format!(
                "unknown model `{s}` (expected rf or knn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ModelKind,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn random_forest(seed: u64) -> Self {
        Self {
            kind: ModelKind::random_forest(),
            seed,
        }
    }

    pub fn knn(k_neighbors: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Knn { k_neighbors },
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::Knn { k_neighbors: 0 } => {
                Err(Error::Parameter("k_neighbors must be at least 1".into()))
            }
            ModelKind::RandomForest {
                n_trees, min_leaf, ..
            } if n_trees == 0 || min_leaf == 0 => Err(Error::Parameter(
                "n_trees and min_leaf must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Most frequent label; ties go to the smaller label.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A CART classification tree (Gini impurity).
#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct TreeBuilder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    mtry: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn build(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in samples.iter() {
            counts[self.y[i]] += 1;
        }
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_done = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_done || samples.len() < 2 * self.min_leaf {
            return self.push(Node::Leaf(label));
        }
        let Some((feature, threshold)) = self.best_split(samples, &counts) else {
            return self.push(Node::Leaf(label));
        };
        let mid = partition_in_place(samples, |&i| self.x[i][feature] <= threshold);
        let id = self.push(Node::Leaf(label));
        let (l, r) = samples.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Best Gini split over `mtry` random features, falling back to the
    /// remaining features when none of those admits a valid split.
    fn best_split(&mut self, samples: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<usize> = samples.to_vec();
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let n = sorted.len();
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.to_vec();
            for pos in 0..n - 1 {
                let c = self.y[sorted[pos]];
                left[c] += 1;
                right[c] -= 1;
                let n_left = pos + 1;
                let n_right = n - n_left;
                let (v, next) = (self.x[sorted[pos]][f], self.x[sorted[pos + 1]][f]);
                if v == next || n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let score = weighted_gini(&left, n_left) + weighted_gini(&right, n_right);
                if best.is_none_or(|(b, _, _)| score < b) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// `n * gini = n - sum_c count_c^2 / n`.
fn weighted_gini(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n - sq / n
}

fn partition_in_place<F: Fn(&usize) -> bool>(v: &mut [usize], pred: F) -> usize {
    let mut i = 0;
    for j in 0..v.len() {
        if pred(&v[j]) {
            v.swap(i, j);
            i += 1;
        }
    }
    i
}

impl DecisionTree {
    pub fn predict_one(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }
}

/// A fitted model.
#[derive(Debug, Clone)]
pub enum Model {
    Knn {
        k: usize,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        n_classes: usize,
    },
    Forest {
        trees: Vec<DecisionTree>,
        n_classes: usize,
    },
}

impl Model {
    pub fn predict_one(&self, row: &[f64]) -> usize {
        match self {
            Model::Knn { k, x, y, n_classes } => {
                let mut d: Vec<(f64, usize)> = x
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (squared_distance(r, row), i))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut votes = vec![0usize; *n_classes];
                for &(_, i) in d.iter().take(*k) {
                    votes[y[i]] += 1;
                }
                majority(&votes)
            }
            Model::Forest { trees, n_classes } => {
                let mut votes = vec![0usize; *n_classes];
                for t in trees {
                    votes[t.predict_one(row)] += 1;
                }
                majority(&votes)
            }
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<usize> {
        x.iter().map(|r| self.predict_one(r)).collect()
    }
}

/// Fits a model. Trees are trained in parallel, each from its own RNG stream
/// derived from `(seed, tree index)`, so the result does not depend on
/// thread scheduling.
pub fn fit(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[usize]) -> Result<Model> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::Parameter("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged feature rows".into()));
    }
    let n_classes = y.iter().copied().max().unwrap() + 1;
    match spec.kind {
        ModelKind::Knn { k_neighbors } => Ok(Model::Knn {
            k: k_neighbors,
            x: x.to_vec(),
            y: y.to_vec(),
            n_classes,
        }),
        ModelKind::RandomForest {
            n_trees,
            max_depth,
            min_leaf,
            features_per_split,
        } => {
            let mtry = features_per_split
                .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
                .clamp(1, d.max(1));
            let n = x.len();
            let trees = (0..n_trees)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::stream(spec.seed, t as u64);
                    let mut samples: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                    if d == 0 {
                        let mut counts = vec![0; n_classes];
                        for &i in &samples {
                            counts[y[i]] += 1;
                        }
                        return DecisionTree {
                            nodes: vec![Node::Leaf(majority(&counts))],
                        };
                    }
                    let mut b = TreeBuilder {
                        x,
                        y,
                        n_classes,
                        max_depth,
                        min_leaf,
                        mtry,
                        rng: r,
                        nodes: Vec::new(),
                    };
                    b.build(&mut samples, 0);
                    DecisionTree { nodes: b.nodes }
                })
                .collect();
            Ok(Model::Forest { trees, n_classes })
        }
    }
}

pub fn train_predict(
    spec: &ClassifierSpec,
    x_train: &[Vec<f64>],
    y_train: &[usize],
    x_test: &[Vec<f64>],
) -> Result<Vec<usize>> {
    Ok(fit(spec, x_train, y_train)?.predict(x_test))
}

/// Support-weighted mean over true classes of one-vs-rest F1.
pub fn weighted_f1(y_true: &[usize], y_pred: &[usize]) -> f64 {
    let n_classes = y_true
        .iter()
        .chain(y_pred)
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fne = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fne[t] += 1;
        }
    }
    let n = y_true.len() as f64;
    (0..n_classes)
        .map(|c| {
            let support = tp[c] + fne[c];
            if support == 0 {
                return 0.0;
            }
            let denom = 2 * tp[c] + fp[c] + fne[c];
            let f1 = 2.0 * tp[c] as f64 / denom as f64;
            support as f64 / n * f1
        })
        .sum()
}

/// Fold id per row. Members of each class are shuffled and dealt round-robin;
/// the dealing position carries over between classes so folds stay even.
pub fn stratified_folds(y: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut r = rng::stream(seed, u64::MAX);
    let mut assignment = vec![0; y.len()];
    let mut next = 0usize;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        members.shuffle(&mut r);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub weighted_f1: f64,
    pub test_indices: Vec<usize>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub per_fold: Vec<FoldResult>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub oof_predictions: Vec<usize>,
    pub fold_assignment: Vec<usize>,
}

/// Stratified k-fold cross-validation with out-of-fold predictions.
pub fn cross_validate(
    spec: &ClassifierSpec,
    x: &[Vec<f64>],
    y: &[usize],
    folds: usize,
    seed: u64,
) -> Result<ClassificationResult> {
    spec.validate()?;
    let n = y.len();
    if x.len() != n {
        return Err(Error::Dimension(format!("{} rows but {n} labels", x.len())));
    }
    if folds < 2 {
        return Err(Error::Parameter("at least 2 folds are required".into()));
    }
    if folds > n {
        return Err(Error::Parameter(format!("{folds} folds for {n} rows")));
    }
    let assignment = stratified_folds(y, folds, seed);
    let per_fold: Vec<FoldResult> = (0..folds)
        .into_par_iter()
        .map(|f| -> Result<FoldResult> {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == f);
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let xs: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
            let fold_spec = ClassifierSpec {
                seed: rng::derive_seed(spec.seed, f as u64),
                ..*spec
            };
            let pred = train_predict(&fold_spec, &xt, &yt, &xs)?;
            let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            Ok(FoldResult {
                weighted_f1: weighted_f1(&truth, &pred),
                test_indices: test,
                predictions: pred,
            })
        })
        .collect::<Result<_>>()?;
    let mut oof = vec![0; n];
    for fr in &per_fold {
        for (&i, &p) in fr.test_indices.iter().zip(&fr.predictions) {
            oof[i] = p;
        }
    }
    let scores: Vec<f64> = per_fold.iter().map(|f| f.weighted_f1).collect();
    let mean = scores.iter().sum::<f64>() / folds as f64;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / folds as f64).sqrt();
    Ok(ClassificationResult {
        per_fold,
        mean,
        std,
        oof_predictions: oof,
        fold_assignment: assignment,
    })
}

/// Columns permuted together when measuring importance (for example all
/// one-hot columns of one categorical feature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub name: String,
    pub importance: f64,
    pub std: f64,
}

/// Share of rows held out for permutation importance.
pub const IMPORTANCE_HOLDOUT_FOLDS: usize = 3;

/// Mean drop in held-out weighted F1 when a feature group is shuffled. The
/// model is fitted on a stratified two-thirds split and scored on the rest;
/// results are sorted by decreasing importance.
pub fn permutation_importance(
    spec: &ClassifierSpec,
    x: &[Vec<f64>],
    y: &[usize],
    groups: &[FeatureGroup],
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    if y.len() < IMPORTANCE_HOLDOUT_FOLDS {
        return Err(Error::TooFewRows {
            required: IMPORTANCE_HOLDOUT_FOLDS,
            found: y.len(),
        });
    }
    let assignment = stratified_folds(y, IMPORTANCE_HOLDOUT_FOLDS, seed);
    let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| assignment[i] == 0);
    let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let model = fit(spec, &xt, &yt)?;
    let xs: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let baseline = weighted_f1(&ys, &model.predict(&xs));

    let mut out: Vec<FeatureImportance> = groups
        .par_iter()
        .enumerate()
        .map(|(g, group)| {
            let mut r = rng::stream(seed, 1 + g as u64);
            let drops: Vec<f64> = (0..repeats)
                .map(|_| {
                    let mut perm: Vec<usize> = (0..xs.len()).collect();
                    perm.shuffle(&mut r);
                    let shuffled: Vec<Vec<f64>> = (0..xs.len())
                        .map(|i| {
                            let mut row = xs[i].clone();
                            for &c in &group.columns {
                                row[c] = xs[perm[i]][c];
                            }
                            row
                        })
                        .collect();
                    baseline - weighted_f1(&ys, &model.predict(&shuffled))
                })
                .collect();
            let mean = drops.iter().sum::<f64>() / repeats as f64;
            let std =
                (drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / repeats as f64).sqrt();
            FeatureImportance {
                name: group.name.clone(),
                importance: mean,
                std,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(out)
}
