//! Tree-ensemble feature maps and the kernels they induce.
//!
//! Each kind encodes how a fixed ensemble processes an instance:
//!
//! * `LeafPath`: one indicator per leaf of the ensemble, set for the leaf the
//!   instance reaches in every tree.
//! * `TreeOutput`: one coordinate per tree holding the reached leaf's value.
//! * `LeafOutput`: the `LeafPath` layout with each indicator replaced by the
//!   reached leaf's value.
//!
//! The kernel is the plain dot product of two maps. Maps are never normalized,
//! so `LeafOutput`/`TreeOutput` maps summed against an all-ones vector (plus
//! the base score) reproduce the ensemble margin exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbdt::TreeEnsemble;

/// Largest training set for which [`KernelRep::gram_matrix`] will allocate
/// the dense `n x n` matrix.
pub const DEFAULT_GRAM_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    LeafPath,
    TreeOutput,
    LeafOutput,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [
        KernelKind::LeafPath,
        KernelKind::TreeOutput,
        KernelKind::LeafOutput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::LeafPath => "LeafPath",
            KernelKind::TreeOutput => "TreeOutput",
            KernelKind::LeafOutput => "LeafOutput",
        }
    }

    /// Length of the feature map for `ensemble`.
    pub fn dimension(self, ensemble: &TreeEnsemble) -> usize {
        match self {
            KernelKind::TreeOutput => ensemble.n_trees(),
            KernelKind::LeafPath | KernelKind::LeafOutput => ensemble.num_leaves(),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "leafpath" => Ok(KernelKind::LeafPath),
            "treeoutput" => Ok(KernelKind::TreeOutput),
            "leafoutput" => Ok(KernelKind::LeafOutput),
            _ => Err(Error::Invalid(format!(
                "unknown kernel `{s}` (expected leafpath, treeoutput or leafoutput)"
            ))),
        }
    }
}

/// Sparse feature vector, entries sorted by strictly increasing index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kind: KernelKind,
    dimension: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureMap {
    pub fn new(kind: KernelKind, dimension: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Invalid(
                "feature map indices must be strictly increasing".into(),
            ));
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: i + 1,
                });
            }
        }
        Ok(Self {
            kind,
            dimension,
            entries,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    /// Sparse-sparse dot product (merge of the two sorted index lists).
    pub fn dot(&self, other: &FeatureMap) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dot product with a dense vector of length `dimension`.
    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, x)| w[i] * x).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x * x).sum()
    }

    /// `w += scale * self`.
    pub fn add_scaled_to(&self, w: &mut [f64], scale: f64) {
        for &(i, x) in &self.entries {
            w[i] += scale * x;
        }
    }

    pub fn squared_distance(&self, other: &FeatureMap) -> f64 {
        (self.squared_norm() + other.squared_norm() - 2.0 * self.dot(other)).max(0.0)
    }
}

/// Feature map of a single instance.
pub fn feature_map(ensemble: &TreeEnsemble, x: &[f64], kind: KernelKind) -> Result<FeatureMap> {
    let leaves = ensemble.leaf_assignment(x)?;
    let values = ensemble.leaf_values();
    let entries = match kind {
        KernelKind::LeafPath => leaves.iter().map(|&l| (l, 1.0)).collect(),
        KernelKind::LeafOutput => leaves.iter().map(|&l| (l, values[l])).collect(),
        KernelKind::TreeOutput => leaves
            .iter()
            .enumerate()
            .map(|(t, &l)| (t, values[l]))
            .collect(),
    };
    Ok(FeatureMap {
        kind,
        dimension: kind.dimension(ensemble),
        entries,
    })
}

/// `k(xa, xb) = phi(xa) . phi(xb)`.
pub fn kernel(ensemble: &TreeEnsemble, xa: &[f64], xb: &[f64], kind: KernelKind) -> Result<f64> {
    let a = feature_map(ensemble, xa, kind)?;
    let b = feature_map(ensemble, xb, kind)?;
    Ok(a.dot(&b))
}

/// Feature maps for every row of a dataset, bound to one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRep {
    kind: KernelKind,
    dimension: usize,
    fingerprint: String,
    row_ids: Vec<u64>,
    maps: Vec<FeatureMap>,
}

pub fn transform(ensemble: &TreeEnsemble, data: &Dataset, kind: KernelKind) -> Result<KernelRep> {
    if data.n_features() != ensemble.n_features() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.n_features(),
            got: data.n_features(),
        });
    }
    let maps = data
        .rows()
        .map(|x| feature_map(ensemble, x, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelRep {
        kind,
        dimension: kind.dimension(ensemble),
        fingerprint: ensemble.fingerprint().to_string(),
        row_ids: data.row_ids().to_vec(),
        maps,
    })
}

#[derive(Serialize, Deserialize)]
struct CsrDoc {
    kind: KernelKind,
    dimension: usize,
    fingerprint: String,
    row_ids: Vec<u64>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl KernelRep {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn maps(&self) -> &[FeatureMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Errors unless this representation was built from `ensemble`.
    pub fn check_ensemble(&self, ensemble: &TreeEnsemble) -> Result<()> {
        if self.fingerprint != ensemble.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                got: ensemble.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    /// Errors unless `map` lives in the same feature space as this representation.
    pub fn check_map(&self, map: &FeatureMap) -> Result<()> {
        if map.kind != self.kind {
            return Err(Error::KindMismatch {
                expected: self.kind.to_string(),
                got: map.kind.to_string(),
            });
        }
        if map.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: map.dimension,
            });
        }
        Ok(())
    }

    /// Similarity of `map` to every row.
    pub fn similarities(&self, map: &FeatureMap) -> Result<Vec<f64>> {
        self.check_map(map)?;
        Ok(self.maps.iter().map(|m| m.dot(map)).collect())
    }

    /// Dense Gram matrix; refuses to allocate beyond `cap` rows.
    pub fn gram_matrix(&self, cap: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.maps.len();
        if n > cap {
            return Err(Error::Invalid(format!(
                "refusing to materialize a {n} x {n} Gram matrix (cap {cap})"
            )));
        }
        let mut g = vec![vec![0.0; n]; n];
        for (i, a) in self.maps.iter().enumerate() {
            for (j, b) in self.maps.iter().enumerate().skip(i) {
                let k = a.dot(b);
                g[i][j] = k;
                g[j][i] = k;
            }
        }
        Ok(g)
    }

    /// Serializes as JSON with CSR-style `indptr`/`indices`/`values` arrays.
    pub fn to_json(&self) -> Result<String> {
        let mut indptr = Vec::with_capacity(self.maps.len() + 1);
        let (mut indices, mut values) = (Vec::new(), Vec::new());
        indptr.push(0);
        for m in &self.maps {
            for &(i, v) in &m.entries {
                indices.push(i);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        let doc = CsrDoc {
            kind: self.kind,
            dimension: self.dimension,
            fingerprint: self.fingerprint.clone(),
            row_ids: self.row_ids.clone(),
            indptr,
            indices,
            values,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: CsrDoc = serde_json::from_str(json)?;
        if doc.indptr.len() != doc.row_ids.len() + 1
            || doc.indices.len() != doc.values.len()
            || doc.indptr.first() != Some(&0)
            || doc.indptr.last() != Some(&doc.indices.len())
            || doc.indptr.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Invalid("malformed CSR arrays".into()));
        }
        let maps = doc
            .indptr
            .windows(2)
            .map(|w| {
                let entries = (w[0]..w[1]).map(|k| (doc.indices[k], doc.values[k])).collect();
                FeatureMap::new(doc.kind, doc.dimension, entries)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: doc.kind,
            dimension: doc.dimension,
            fingerprint: doc.fingerprint,
            row_ids: doc.row_ids,
            maps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{GbdtConfig, TreeNode};

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

    #[test]
    fn two_tree_example_maps() {
        let e = two_tree_example();
        let x = [1.0, 0.0, 0.0];
        let tree_out = feature_map(&e, &x, KernelKind::TreeOutput).unwrap();
        assert_eq!(tree_out.to_dense(), vec![5.0, 3.8]);
        let leaf_out = feature_map(&e, &x, KernelKind::LeafOutput).unwrap();
        assert_eq!(leaf_out.entries(), &[(2, 5.0), (5, 3.8)]);
        assert_eq!(leaf_out.dot_dense(&[1.0; 7]), 8.8);
        let path = feature_map(&e, &x, KernelKind::LeafPath).unwrap();
        assert_eq!(path.entries(), &[(2, 1.0), (5, 1.0)]);
        assert_eq!(path.dimension(), 7);
        assert_eq!(path.squared_norm(), 2.0);
    }

    #[test]
    fn leafpath_counts_shared_leaves() {
        let e = two_tree_example();
        // (1,0,0) -> leaves 2,5 ; (1,0,1) -> leaves 3,5 ; (0,1,0) -> leaves 1,6
        let k = |a: &[f64], b: &[f64]| kernel(&e, a, b, KernelKind::LeafPath).unwrap();
        assert_eq!(k(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), 2.0);
        assert_eq!(k(&[1.0, 0.0, 0.0], &[1.0, 0.0, 1.0]), 1.0);
        assert_eq!(k(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn kernel_kind_strings() {
        for kind in KernelKind::ALL {
            assert_eq!(kind.as_str().parse::<KernelKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
        }
        assert_eq!("leafoutput".parse::<KernelKind>().unwrap(), KernelKind::LeafOutput);
        assert!("featurepath".parse::<KernelKind>().is_err());
    }

    #[test]
    fn feature_map_validation() {
        assert!(FeatureMap::new(KernelKind::LeafPath, 3, vec![(1, 1.0), (1, 1.0)]).is_err());
        assert!(FeatureMap::new(KernelKind::LeafPath, 3, vec![(3, 1.0)]).is_err());
    }

    #[test]
    fn empty_transform_and_mismatch() {
        let e = two_tree_example();
        let empty = Dataset::new(vec![], vec![], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let rep = transform(&e, &empty, KernelKind::LeafPath).unwrap();
        assert!(rep.is_empty());
        let wrong = Dataset::new(vec![vec![1.0]], vec![1], vec!["a".into()]).unwrap();
        assert!(transform(&e, &wrong, KernelKind::LeafPath).is_err());
    }

    #[test]
    fn gram_cap_enforced() {
        let e = two_tree_example();
        let d = Dataset::new(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![1, -1, 1],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let rep = transform(&e, &d, KernelKind::LeafOutput).unwrap();
        assert!(rep.gram_matrix(2).is_err());
        let g = rep.gram_matrix(DEFAULT_GRAM_CAP).unwrap();
        assert_eq!(g[2][2], 25.0 + 3.8 * 3.8);
    }

    #[test]
    fn csr_round_trip() {
        let e = two_tree_example();
        let d = Dataset::new(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]],
            vec![1, -1],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let rep = transform(&e, &d, KernelKind::TreeOutput).unwrap();
        let json = rep.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["indptr"], serde_json::json!([0, 2, 4]));
        assert_eq!(v["kind"], "TreeOutput");
        assert_eq!(KernelRep::from_json(&json).unwrap(), rep);
        assert!(rep.check_ensemble(&e).is_ok());
    }
}
