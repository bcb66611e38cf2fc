//! Gradient-boosted binary regression trees for `{-1, +1}` classification.
//!
//! Trees are grown on the first and second derivatives of the logistic loss
//! with exact greedy split search. Leaf values are Newton steps scaled by the
//! learning rate. Every leaf in the ensemble gets a global id, contiguous from
//! zero in tree order, which is what the kernels index by.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{seeded_rng, Dataset};
use crate::error::{Error, Result};
use crate::stats::{sigmoid, softplus};

/// Depth used for "unlimited" trees.
pub const MAX_DEPTH_CAP: usize = 32;

const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub num_trees: usize,
    /// `None` means unlimited, which is capped at [`MAX_DEPTH_CAP`].
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// L2 penalty added to the hessian sum in split gains and leaf values.
    pub l2_regularization: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            num_trees: 100,
            max_depth: Some(3),
            learning_rate: 0.1,
            min_samples_leaf: 1,
            l2_regularization: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::OutOfRange {
                name: "num_trees",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::OutOfRange {
                name: "learning_rate",
                value: self.learning_rate,
                expected: "0 < lr <= 1",
            });
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::OutOfRange {
                name: "min_samples_leaf",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if self.l2_regularization.is_nan() || self.l2_regularization < 0.0 {
            return Err(Error::OutOfRange {
                name: "l2_regularization",
                value: self.l2_regularization,
                expected: ">= 0",
            });
        }
        Ok(())
    }

    pub fn effective_depth(&self) -> usize {
        self.max_depth.unwrap_or(MAX_DEPTH_CAP).min(MAX_DEPTH_CAP)
    }

    /// Trees in {10, 100, 250} crossed with depth in {3, 5, 10, unlimited}.
    pub fn standard_grid(base: &GbdtConfig) -> Vec<GbdtConfig> {
        let mut grid = Vec::new();
        for num_trees in [10, 100, 250] {
            for max_depth in [Some(3), Some(5), Some(10), None] {
                grid.push(GbdtConfig {
                    num_trees,
                    max_depth,
                    ..base.clone()
                });
            }
        }
        grid
    }
}

/// A binary decision-tree node. Instances with `x[feature_index] < threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf_id: usize,
        value: f64,
    },
}

impl TreeNode {
    pub fn leaf(leaf_id: usize, value: f64) -> Self {
        TreeNode::Leaf { leaf_id, value }
    }

    pub fn split(feature_index: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split {
            feature_index,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Returns `(leaf_id, value)` of the leaf `x` routes to.
    pub fn route(&self, x: &[f64]) -> (usize, f64) {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf_id, value } => return (*leaf_id, *value),
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature_index] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    fn visit_leaves(&self, f: &mut impl FnMut(usize, f64)) {
        match self {
            TreeNode::Leaf { leaf_id, value } => f(*leaf_id, *value),
            TreeNode::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature_index,
                left,
                right,
                ..
            } => [Some(*feature_index), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        let mut count = 0;
        self.visit_leaves(&mut |_, _| count += 1);
        count
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleDoc {
    n_features: usize,
    base_score: f64,
    num_leaves: usize,
    config: GbdtConfig,
    trees: Vec<TreeNode>,
}

/// A trained (or hand-built) additive ensemble of regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<TreeNode>,
    num_leaves: usize,
    n_features: usize,
    base_score: f64,
    config: GbdtConfig,
    leaf_values: Vec<f64>,
    leaf_tree: Vec<usize>,
    fingerprint: String,
}

impl TreeEnsemble {
    /// Assembles an ensemble, checking that leaf ids are unique and
    /// contiguous from zero across the trees (in tree order).
    pub fn from_trees(
        trees: Vec<TreeNode>,
        n_features: usize,
        base_score: f64,
        config: GbdtConfig,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Empty("tree list"));
        }
        let mut leaves: Vec<(usize, f64, usize)> = Vec::new();
        for (t, tree) in trees.iter().enumerate() {
            if let Some(f) = tree.max_feature() {
                if f >= n_features {
                    return Err(Error::Invalid(format!(
                        "tree {t} splits on feature {f} but the ensemble has {n_features} features"
                    )));
                }
            }
            tree.visit_leaves(&mut |id, v| leaves.push((id, v, t)));
        }
        let num_leaves = leaves.len();
        let mut leaf_values = vec![f64::NAN; num_leaves];
        let mut leaf_tree = vec![usize::MAX; num_leaves];
        for &(id, v, t) in &leaves {
            if id >= num_leaves || leaf_tree[id] != usize::MAX {
                return Err(Error::Invalid(format!(
                    "leaf ids must be unique and contiguous in 0..{num_leaves}; found {id}"
                )));
            }
            leaf_values[id] = v;
            leaf_tree[id] = t;
        }
        if leaf_tree.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid(
                "leaf ids must increase with tree index".into(),
            ));
        }
        let doc = EnsembleDoc {
            n_features,
            base_score,
            num_leaves,
            config,
            trees,
        };
        let json = serde_json::to_string(&doc)?;
        let fingerprint = hex::encode(Sha256::digest(json.as_bytes()));
        Ok(Self {
            trees: doc.trees,
            num_leaves,
            n_features,
            base_score,
            config: doc.config,
            leaf_values,
            leaf_tree,
            fingerprint,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = EnsembleDoc {
            n_features: self.n_features,
            base_score: self.base_score,
            num_leaves: self.num_leaves,
            config: self.config.clone(),
            trees: self.trees.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: EnsembleDoc = serde_json::from_str(json)?;
        let ens = Self::from_trees(doc.trees, doc.n_features, doc.base_score, doc.config)?;
        if ens.num_leaves != doc.num_leaves {
            return Err(Error::Invalid(format!(
                "document declares {} leaves but trees contain {}",
                doc.num_leaves, ens.num_leaves
            )));
        }
        Ok(ens)
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn config(&self) -> &GbdtConfig {
        &self.config
    }

    /// Leaf values indexed by global leaf id.
    pub fn leaf_values(&self) -> &[f64] {
        &self.leaf_values
    }

    /// Index of the tree holding each leaf id.
    pub fn leaf_tree(&self) -> &[usize] {
        &self.leaf_tree
    }

    /// SHA-256 of the serialized ensemble, hex encoded.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Global leaf id reached in each tree.
    pub fn leaf_assignment(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        Ok(self.trees.iter().map(|t| t.route(x).0).collect())
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.base_score + self.trees.iter().map(|t| t.route(x).1).sum::<f64>())
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<i8> {
        Ok(if self.predict_margin(x)? > 0.0 { 1 } else { -1 })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.predict_margin(x)?))
    }

    /// Logistic loss `log(1 + exp(-y * margin))`.
    pub fn instance_loss(&self, x: &[f64], y: i8) -> Result<f64> {
        if y != 1 && y != -1 {
            return Err(Error::InvalidLabel(y as i64));
        }
        Ok(softplus(-(y as f64) * self.predict_margin(x)?))
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: data.n_features(),
            });
        }
        Ok(())
    }

    pub fn predict_margins(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_data(data)?;
        Ok(data
            .rows()
            .map(|x| self.base_score + self.trees.iter().map(|t| t.route(x).1).sum::<f64>())
            .collect())
    }

    pub fn predict_labels(&self, data: &Dataset) -> Result<Vec<i8>> {
        Ok(self
            .predict_margins(data)?
            .into_iter()
            .map(|m| if m > 0.0 { 1 } else { -1 })
            .collect())
    }

    pub fn predict_probas(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self.predict_margins(data)?.into_iter().map(sigmoid).collect())
    }

    pub fn losses(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self
            .predict_margins(data)?
            .into_iter()
            .zip(data.labels())
            .map(|(m, &y)| softplus(-(y as f64) * m))
            .collect())
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let pred = self.predict_labels(data)?;
        Ok(accuracy(&pred, data.labels()))
    }
}

pub(crate) fn accuracy(pred: &[i8], truth: &[i8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Trains an ensemble of exactly `config.num_trees` trees.
pub fn fit(train: &Dataset, config: &GbdtConfig) -> Result<TreeEnsemble> {
    fit_traced(train, config).map(|(e, _)| e)
}

/// Like [`fit`], also returning the mean training loss before boosting and
/// after each tree (`num_trees + 1` values).
pub fn fit_traced(train: &Dataset, config: &GbdtConfig) -> Result<(TreeEnsemble, Vec<f64>)> {
    config.validate()?;
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let p = train.count_positive() as f64 / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();
    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mean_loss = |m: &[f64]| m.iter().zip(&y).map(|(m, y)| softplus(-y * m)).sum::<f64>() / n as f64;
    let mut trace = vec![mean_loss(&margins)];

    let mut builder = TreeBuilder {
        data: train,
        config,
        max_depth: config.effective_depth(),
        lambda: config.l2_regularization,
        y: &y,
        grad: &mut grad,
        hess: &mut hess,
        margins: &mut margins,
        next_leaf: 0,
    };
    let mut trees = Vec::with_capacity(config.num_trees);
    let all: Vec<usize> = (0..n).collect();
    for _ in 0..config.num_trees {
        builder.compute_derivatives();
        let tree = builder.grow(all.clone(), 0);
        trees.push(tree);
        trace.push(mean_loss(builder.margins));
    }

    let ens = TreeEnsemble::from_trees(trees, train.n_features(), base_score, config.clone())?;
    Ok((ens, trace))
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    config: &'a GbdtConfig,
    max_depth: usize,
    lambda: f64,
    y: &'a [f64],
    grad: &'a mut Vec<f64>,
    hess: &'a mut Vec<f64>,
    margins: &'a mut Vec<f64>,
    next_leaf: usize,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn compute_derivatives(&mut self) {
        for i in 0..self.y.len() {
            // d/dF of log(1 + exp(-yF)) with t = (y + 1) / 2
            let p = sigmoid(self.margins[i]);
            let t = (self.y[i] + 1.0) / 2.0;
            self.grad[i] = p - t;
            self.hess[i] = p * (1.0 - p);
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let msl = self.config.min_samples_leaf;
        if depth < self.max_depth && rows.len() >= 2 * msl {
            if let Some(split) = self.best_split(&rows) {
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| self.data.value(i, split.feature) < split.threshold);
                let left = self.grow(left, depth + 1);
                let right = self.grow(right, depth + 1);
                return TreeNode::split(split.feature, split.threshold, left, right);
            }
        }
        self.make_leaf(&rows)
    }

    fn best_split(&self, rows: &[usize]) -> Option<SplitCandidate> {
        let msl = self.config.min_samples_leaf;
        let g_total: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let parent = score(g_total, h_total, self.lambda);
        let mut best: Option<SplitCandidate> = None;
        let mut sorted = rows.to_vec();
        for f in 0..self.data.n_features() {
            sorted.sort_by(|&a, &b| {
                self.data
                    .value(a, f)
                    .total_cmp(&self.data.value(b, f))
                    .then(a.cmp(&b))
            });
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let n_left = k + 1;
                if n_left < msl || sorted.len() - n_left < msl {
                    continue;
                }
                let lo = self.data.value(i, f);
                let hi = self.data.value(sorted[k + 1], f);
                if lo >= hi {
                    continue;
                }
                let gain = score(gl, hl, self.lambda)
                    + score(g_total - gl, h_total - hl, self.lambda)
                    - parent;
                if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold <= lo {
                        threshold = hi;
                    }
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn make_leaf(&mut self, rows: &[usize]) -> TreeNode {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let denom = h + self.lambda;
        let mut value = if denom > 0.0 {
            -self.config.learning_rate * g / denom
        } else {
            0.0
        };
        // The Newton step can overshoot on a leaf whose hessian is much
        // smaller along the step than at the start; halve until the leaf's
        // loss does not increase.
        let leaf_loss = |c: f64| -> f64 {
            rows.iter()
                .map(|&i| softplus(-self.y[i] * (self.margins[i] + c)))
                .sum()
        };
        let current = leaf_loss(0.0);
        let mut halvings = 0;
        while value != 0.0 && leaf_loss(value) > current {
            value /= 2.0;
            halvings += 1;
            if halvings > 60 {
                value = 0.0;
            }
        }
        for &i in rows {
            self.margins[i] += value;
        }
        let id = self.next_leaf;
        self.next_leaf += 1;
        TreeNode::leaf(id, value)
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Result of one grid point in [`tune`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub config: GbdtConfig,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// K-fold cross-validated accuracy for every grid point.
pub fn cross_validate(
    train: &Dataset,
    grid: &[GbdtConfig],
    folds: usize,
    seed: u64,
) -> Result<Vec<CvResult>> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    if folds < 2 || folds > train.n_rows() {
        return Err(Error::OutOfRange {
            name: "folds",
            value: folds as f64,
            expected: "2 <= folds <= n",
        });
    }
    let n = train.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut splits = Vec::with_capacity(folds);
    for k in 0..folds {
        let mut held = vec![false; n];
        for &i in order.iter().skip(k).step_by(folds) {
            held[i] = true;
        }
        let (val_idx, fit_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| held[i]);
        let (fit_part, val_part) = (train.subset(&fit_idx), train.subset(&val_idx));
        if !fit_part.has_both_classes() || !val_part.has_both_classes() {
            return Err(Error::Invalid(format!(
                "cross-validation fold {k} does not contain both classes"
            )));
        }
        splits.push((fit_part, val_part));
    }
    grid.iter()
        .map(|config| {
            let fold_accuracies = splits
                .iter()
                .map(|(fit_part, val_part)| fit(fit_part, config)?.accuracy(val_part))
                .collect::<Result<Vec<_>>>()?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
            Ok(CvResult {
                config: config.clone(),
                fold_accuracies,
                mean_accuracy,
            })
        })
        .collect()
}

/// Picks the grid config with the highest mean fold accuracy. Ties go to
/// fewer trees, then shallower trees, then grid order.
pub fn tune(train: &Dataset, grid: &[GbdtConfig], folds: usize, seed: u64) -> Result<GbdtConfig> {
    let results = cross_validate(train, grid, folds, seed)?;
    Ok(select_best(&results).config.clone())
}

pub fn select_best(results: &[CvResult]) -> &CvResult {
    let mut best = &results[0];
    for r in &results[1..] {
        let better = match r.mean_accuracy.total_cmp(&best.mean_accuracy) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                (r.config.num_trees, r.config.effective_depth())
                    < (best.config.num_trees, best.config.effective_depth())
            }
        };
        if better {
            best = r;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tree_example() -> TreeEnsemble {
        let t1 = TreeNode::split(
            0,
            0.5,
            TreeNode::split(1, 0.5, TreeNode::leaf(0, -4.0), TreeNode::leaf(1, 2.0)),
            TreeNode::split(2, 0.5, TreeNode::leaf(2, 5.0), TreeNode::leaf(3, -1.0)),
        );
        let t2 = TreeNode::split(
            1,
            0.5,
            TreeNode::split(0, 0.5, TreeNode::leaf(4, -1.2), TreeNode::leaf(5, 3.8)),
            TreeNode::leaf(6, 0.5),
        );
        TreeEnsemble::from_trees(vec![t1, t2], 3, 0.0, GbdtConfig::default()).unwrap()
    }

    fn separable(n: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let a = (i as f64 * 0.618).fract() * 2.0 - 1.0;
            let b = (i as f64 * 0.414).fract() * 2.0 - 1.0;
            rows.push(vec![a, b]);
            labels.push(if a + 0.5 * b > 0.1 { 1 } else { -1 });
        }
        Dataset::new(rows, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn two_tree_example_worked_example() {
        let e = two_tree_example();
        let x = [1.0, 0.0, 0.0];
        let leaves = e.leaf_assignment(&x).unwrap();
        assert_eq!(leaves, vec![2, 5]);
        assert_eq!(e.leaf_values()[2], 5.0);
        assert_eq!(e.leaf_values()[5], 3.8);
        assert_eq!(e.predict_margin(&x).unwrap(), 8.8);
        assert_eq!(e.predict_label(&x).unwrap(), 1);
    }

    #[test]
    fn dimension_mismatch() {
        let e = two_tree_example();
        assert!(matches!(
            e.predict_margin(&[1.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(e.leaf_assignment(&[0.0; 4]).is_err());
    }

    #[test]
    fn proba_and_loss_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        let p = sigmoid(8.8);
        assert!((p - 1.0 / (1.0 + (-8.8f64).exp())).abs() < 1e-15);
        assert!((p - 0.99985).abs() < 1e-5);
        let e = two_tree_example();
        let x = [1.0, 0.0, 0.0];
        let loss = e.instance_loss(&x, -1).unwrap();
        assert!((loss - (1.0 + 8.8f64.exp()).ln()).abs() < 1e-12);
        assert!((loss - 8.80015).abs() < 1e-5);
        assert!(e.instance_loss(&x, 0).is_err());
        let zero = TreeEnsemble::from_trees(vec![TreeNode::leaf(0, 0.0)], 1, 0.0, GbdtConfig::default())
            .unwrap();
        assert!((zero.instance_loss(&[3.0], 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(e.instance_loss(&x, 1).unwrap() < 1e-3);
    }

    #[test]
    fn zero_leaves_give_base_score() {
        let e = TreeEnsemble::from_trees(
            vec![TreeNode::split(0, 1.0, TreeNode::leaf(0, 0.0), TreeNode::leaf(1, 0.0))],
            1,
            -0.7,
            GbdtConfig::default(),
        )
        .unwrap();
        assert_eq!(e.predict_margin(&[0.0]).unwrap(), -0.7);
        assert_eq!(e.predict_margin(&[5.0]).unwrap(), -0.7);
    }

    #[test]
    fn leaf_ids_must_be_contiguous() {
        let bad = TreeNode::split(0, 1.0, TreeNode::leaf(0, 1.0), TreeNode::leaf(2, 1.0));
        assert!(TreeEnsemble::from_trees(vec![bad], 1, 0.0, GbdtConfig::default()).is_err());
        let dup = vec![TreeNode::leaf(0, 1.0), TreeNode::leaf(0, 2.0)];
        assert!(TreeEnsemble::from_trees(dup, 1, 0.0, GbdtConfig::default()).is_err());
    }

    #[test]
    fn json_round_trip_keeps_fingerprint() {
        let e = two_tree_example();
        let back = TreeEnsemble::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.fingerprint(), e.fingerprint());
        let v: serde_json::Value = serde_json::from_str(&e.to_json().unwrap()).unwrap();
        assert_eq!(v["trees"][0]["feature_index"], 0);
        assert_eq!(v["trees"][1]["right"]["leaf_id"], 6);
    }

    #[test]
    fn separable_toy_fits_perfectly() {
        let d = separable(100);
        let cfg = GbdtConfig {
            num_trees: 50,
            max_depth: Some(3),
            learning_rate: 0.3,
            ..Default::default()
        };
        let e = fit(&d, &cfg).unwrap();
        assert_eq!(e.n_trees(), 50);
        assert_eq!(e.accuracy(&d).unwrap(), 1.0);
        assert!(e.trees().iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn depth_zero_predicts_prior() {
        let d = separable(40);
        let cfg = GbdtConfig {
            num_trees: 1,
            max_depth: Some(0),
            ..Default::default()
        };
        let e = fit(&d, &cfg).unwrap();
        assert_eq!(e.num_leaves(), 1);
        let p = d.count_positive() as f64 / 40.0;
        let prior = (p / (1.0 - p)).ln();
        for x in d.rows() {
            assert!((e.predict_margin(x).unwrap() - prior).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let d = separable(80);
        let cfg = GbdtConfig {
            num_trees: 10,
            max_depth: Some(4),
            ..Default::default()
        };
        let a = fit(&d, &cfg).unwrap();
        let b = fit(&d, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn fit_errors() {
        let one_class =
            Dataset::new(vec![vec![0.0], vec![1.0]], vec![1, 1], vec!["a".into()]).unwrap();
        assert!(matches!(fit(&one_class, &GbdtConfig::default()), Err(Error::SingleClass)));
        let d = separable(10);
        let bad = GbdtConfig {
            num_trees: 0,
            ..Default::default()
        };
        assert!(fit(&d, &bad).is_err());
        let bad = GbdtConfig {
            learning_rate: 1.5,
            ..Default::default()
        };
        assert!(fit(&d, &bad).is_err());
    }

    #[test]
    fn constant_features_yield_single_leaf_trees() {
        let d = Dataset::new(
            vec![vec![1.0, 2.0]; 6],
            vec![1, -1, 1, -1, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let e = fit(&d, &GbdtConfig::default()).unwrap();
        assert!(e.trees().iter().all(|t| t.n_leaves() == 1));
    }

    #[test]
    fn min_samples_leaf_respected() {
        let d = separable(60);
        let cfg = GbdtConfig {
            num_trees: 5,
            max_depth: None,
            min_samples_leaf: 7,
            ..Default::default()
        };
        let e = fit(&d, &cfg).unwrap();
        let mut counts = vec![0usize; e.num_leaves()];
        for x in d.rows() {
            for id in e.leaf_assignment(x).unwrap() {
                counts[id] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c >= 7), "{counts:?}");
    }

    #[test]
    fn tune_singleton_and_ties() {
        let d = separable(60);
        let cfg = GbdtConfig {
            num_trees: 3,
            ..Default::default()
        };
        assert_eq!(tune(&d, std::slice::from_ref(&cfg), 3, 0).unwrap(), cfg);
        assert!(tune(&d, &[], 3, 0).is_err());

        let mk = |t, dep| CvResult {
            config: GbdtConfig {
                num_trees: t,
                max_depth: dep,
                ..Default::default()
            },
            fold_accuracies: vec![],
            mean_accuracy: 0.9,
        };
        let rs = vec![mk(100, Some(5)), mk(10, None), mk(10, Some(3))];
        assert_eq!(select_best(&rs).config.max_depth, Some(3));
        assert_eq!(select_best(&rs).config.num_trees, 10);
    }

    #[test]
    fn standard_grid_shape() {
        let g = GbdtConfig::standard_grid(&GbdtConfig::default());
        assert_eq!(g.len(), 12);
        assert!(g.iter().any(|c| c.num_trees == 250 && c.max_depth.is_none()));
    }
}
