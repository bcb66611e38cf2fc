#![allow(dead_code)]

use leafrep::gbdt::{self, GbdtConfig, TreeEnsemble, TreeNode};
use leafrep::kernel::{transform, KernelKind, KernelRep};
use leafrep::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two trees over three binary attributes; x = (1, 0, 0) reaches the leaf
/// worth 5 in the first tree and 3.8 in the second.
pub fn two_tree_example() -> TreeEnsemble {
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

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in [-1, 1]^2 labeled by a line, with a margin band removed.
pub fn separable_toy(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let a: f64 = r.gen_range(-1.0..1.0);
        let b: f64 = r.gen_range(-1.0..1.0);
        let s = a + 0.5 * b - 0.1;
        if s.abs() < 0.05 {
            continue;
        }
        rows.push(vec![a, b]);
        labels.push(if s > 0.0 { 1 } else { -1 });
    }
    Dataset::new(rows, labels, vec!["a".into(), "b".into()]).unwrap()
}

/// Random features with a noisy nonlinear label; both classes guaranteed.
pub fn noisy_table(n: usize, d: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    loop {
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
            let s = x[0] * x[0] - 1.0 + if d > 1 { x[1] } else { 0.0 } + r.gen_range(-0.7..0.7);
            rows.push(x);
            labels.push(if s > 0.0 { 1 } else { -1 });
        }
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let data = Dataset::new(rows, labels, names).unwrap();
        if data.has_both_classes() {
            return data;
        }
    }
}

pub fn small_config(seed: u64) -> GbdtConfig {
    GbdtConfig {
        num_trees: 5,
        max_depth: Some(2),
        learning_rate: 0.5,
        min_samples_leaf: 1,
        l2_regularization: 1.0,
        seed,
    }
}

/// A random dual problem: n <= 20 rows, d <= 5 features, a small ensemble,
/// and the ensemble's own predicted labels.
pub struct Problem {
    pub data: Dataset,
    pub ensemble: TreeEnsemble,
    pub rep: KernelRep,
    pub yhat: Vec<i8>,
}

pub fn random_problem(seed: u64, kind: KernelKind) -> Problem {
    let mut r = rng(seed ^ 0x5eed);
    let n = r.gen_range(4..=20);
    let d = r.gen_range(1..=5);
    let data = noisy_table(n, d, seed);
    let ensemble = gbdt::fit(&data, &small_config(seed)).unwrap();
    let rep = transform(&ensemble, &data, kind).unwrap();
    let yhat = ensemble.predict_labels(&data).unwrap();
    Problem {
        data,
        ensemble,
        rep,
        yhat,
    }
}
