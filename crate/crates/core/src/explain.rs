//! Global rankings and local decompositions over training rows.
//!
//! A surrogate's decision value for a query `x_t` splits exactly into one
//! term per training row: `alpha_i * yhat_i * gamma_i` with
//! `gamma_i = k(x_i, x_t)`. Positive terms push toward `+1`, negative toward
//! `-1`. The same module holds the baseline orderings the experiments compare
//! against: random, loss-based, and a k-nearest-neighbor model in the kernel's
//! feature space.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::data::{seeded_rng, Dataset};
use crate::error::{Error, Result};
use crate::gbdt::TreeEnsemble;
use crate::kernel::{feature_map, transform, FeatureMap, KernelKind, KernelRep};
use crate::stats::{pearson, softplus};
use crate::surrogate::{validation_split, FidelityReport, GridScores, SurrogateModel};

/// Training rows ranked most-important first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    pub method: String,
    pub ranked_row_ids: Vec<u64>,
    /// Parallel to `ranked_row_ids`, non-increasing.
    pub scores: Vec<f64>,
}

impl Ordering {
    /// Sorts rows by descending score, breaking ties by ascending row id.
    pub fn from_scores(method: impl Into<String>, row_ids: &[u64], scores: &[f64]) -> Result<Self> {
        if row_ids.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                expected: row_ids.len(),
                got: scores.len(),
            });
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Invalid("ordering scores contain NaN".into()));
        }
        let mut idx: Vec<usize> = (0..row_ids.len()).collect();
        idx.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(row_ids[a].cmp(&row_ids[b]))
        });
        Ok(Self {
            method: method.into(),
            ranked_row_ids: idx.iter().map(|&i| row_ids[i]).collect(),
            scores: idx.iter().map(|&i| scores[i]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ranked_row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_row_ids.is_empty()
    }

    /// Errors unless this ordering ranks exactly the rows in `universe`.
    pub fn check_permutation_of(&self, universe: &[u64]) -> Result<()> {
        let mut a = self.ranked_row_ids.clone();
        let mut b = universe.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::Invalid(format!(
                "ordering `{}` is not a permutation of the training rows",
                self.method
            )));
        }
        if self.scores.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Invalid(format!(
                "ordering `{}` scores are not non-increasing",
                self.method
            )));
        }
        Ok(())
    }

    /// `rank,row_id,score` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,row_id,score\n");
        for (rank, (id, s)) in self.ranked_row_ids.iter().zip(&self.scores).enumerate() {
            let _ = writeln!(out, "{rank},{id},{s}");
        }
        out
    }
}

/// Ranks training rows by `|alpha_i|`.
pub fn global_importance(model: &SurrogateModel) -> Ordering {
    let scores: Vec<f64> = model.alphas().iter().map(|a| a.abs()).collect();
    Ordering::from_scores(
        format!("global-{}", model.family()),
        model.train_rep().row_ids(),
        &scores,
    )
    .expect("alphas are finite and match the row ids")
}

/// Ranks rows by loss, highest first.
pub fn loss_ordering(method: impl Into<String>, row_ids: &[u64], losses: &[f64]) -> Result<Ordering> {
    Ordering::from_scores(method, row_ids, losses)
}

/// Logistic loss of the surrogate's probabilities against `data`'s labels.
pub fn surrogate_losses(
    model: &SurrogateModel,
    ensemble: &TreeEnsemble,
    data: &Dataset,
) -> Result<Vec<f64>> {
    Ok(model
        .decisions(ensemble, data)?
        .into_iter()
        .zip(data.labels())
        .map(|(d, &y)| softplus(-(y as f64) * d))
        .collect())
}

/// Seeded uniform permutation of `row_ids`; scores count down from `n`.
pub fn random_ordering(row_ids: &[u64], seed: u64) -> Result<Ordering> {
    if row_ids.is_empty() {
        return Err(Error::Empty("row id list"));
    }
    let mut ranked = row_ids.to_vec();
    ranked.shuffle(&mut seeded_rng(seed));
    let n = ranked.len();
    Ok(Ordering {
        method: "random".into(),
        ranked_row_ids: ranked,
        scores: (0..n).map(|r| (n - r) as f64).collect(),
    })
}

/// Decomposition of one query's surrogate decision over the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub query_id: String,
    /// Training row ids, parallel to the vectors below.
    pub row_ids: Vec<u64>,
    /// `gamma_i = k(x_i, x_t)`.
    pub similarities: Vec<f64>,
    /// `alpha_i * yhat_i`.
    pub signed_weights: Vec<f64>,
    /// `alpha_i * yhat_i * gamma_i`.
    pub contributions: Vec<f64>,
    /// The ensemble's predicted label for the query.
    pub predicted_label: i8,
    /// Surrogate decision value, `w . phi(x_t)`.
    pub decision: f64,
}

impl Explanation {
    pub fn total_contribution(&self) -> f64 {
        self.contributions.iter().sum()
    }

    /// Positions of the `k` largest strictly positive contributions, largest
    /// first (ties by ascending row id).
    pub fn top_positive(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.contributions.len())
            .filter(|&i| self.contributions[i] > 0.0)
            .collect();
        idx.sort_by(|&a, &b| {
            self.contributions[b]
                .total_cmp(&self.contributions[a])
                .then(self.row_ids[a].cmp(&self.row_ids[b]))
        });
        idx.truncate(k);
        idx
    }

    /// `row_id,gamma,signed_weight,contribution` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_id,gamma,signed_weight,contribution\n");
        for i in 0..self.row_ids.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.row_ids[i], self.similarities[i], self.signed_weights[i], self.contributions[i]
            );
        }
        out
    }
}

pub fn local_explanation(
    model: &SurrogateModel,
    ensemble: &TreeEnsemble,
    x_t: &[f64],
    query_id: impl Into<String>,
) -> Result<Explanation> {
    let rep = model.train_rep();
    rep.check_ensemble(ensemble)?;
    let map = feature_map(ensemble, x_t, rep.kind())?;
    let similarities = rep.similarities(&map)?;
    let signed_weights = model.signed_weights();
    let contributions = signed_weights
        .iter()
        .zip(&similarities)
        .map(|(s, g)| s * g)
        .collect();
    Ok(Explanation {
        query_id: query_id.into(),
        row_ids: rep.row_ids().to_vec(),
        similarities,
        signed_weights,
        contributions,
        predicted_label: ensemble.predict_label(x_t)?,
        decision: model.decision(&map)?,
    })
}

/// Sums, over the queries, each training row's contribution toward the
/// query's predicted label, and ranks rows by that total.
///
/// Computed as `alpha_i yhat_i (phi_i . u)` with `u = sum_q label_q phi_q`,
/// which equals summing the per-query explanations.
pub fn aggregate_explanations(
    model: &SurrogateModel,
    ensemble: &TreeEnsemble,
    queries: &Dataset,
) -> Result<Ordering> {
    if queries.is_empty() {
        return Err(Error::Empty("query list"));
    }
    let rep = model.train_rep();
    rep.check_ensemble(ensemble)?;
    let labels = ensemble.predict_labels(queries)?;
    let mut u = vec![0.0; rep.dimension()];
    for (x, &label) in queries.rows().zip(&labels) {
        feature_map(ensemble, x, rep.kind())?.add_scaled_to(&mut u, label as f64);
    }
    let scores: Vec<f64> = rep
        .maps()
        .iter()
        .zip(model.signed_weights())
        .map(|(m, s)| s * m.dot_dense(&u))
        .collect();
    Ordering::from_scores(
        format!("aggregate-{}", model.family()),
        rep.row_ids(),
        &scores,
    )
}

/// Inverted index over a representation's nonzero coordinates, for fast
/// similarity of one map against every row.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    postings: Vec<Vec<(usize, f64)>>,
    n_rows: usize,
}

impl SimilarityIndex {
    pub fn new(rep: &KernelRep) -> Self {
        let mut postings = vec![Vec::new(); rep.dimension()];
        for (row, m) in rep.maps().iter().enumerate() {
            for &(i, v) in m.entries() {
                postings[i].push((row, v));
            }
        }
        Self {
            postings,
            n_rows: rep.len(),
        }
    }

    pub fn similarities(&self, map: &FeatureMap) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_rows];
        for &(i, v) in map.entries() {
            for &(row, w) in &self.postings[i] {
                acc[row] += v * w;
            }
        }
        acc
    }
}

/// k-nearest neighbors under Euclidean distance in feature-map space,
/// voting with the ensemble's predicted labels.
#[derive(Debug, Clone)]
pub struct Teknn {
    k: usize,
    rep: KernelRep,
    yhat: Vec<i8>,
    sq_norms: Vec<f64>,
    index: SimilarityIndex,
}

impl Teknn {
    pub fn new(rep: KernelRep, yhat: Vec<i8>, k: usize) -> Result<Self> {
        if yhat.len() != rep.len() {
            return Err(Error::DimensionMismatch {
                expected: rep.len(),
                got: yhat.len(),
            });
        }
        if k == 0 || k >= rep.len() {
            return Err(Error::OutOfRange {
                name: "k",
                value: k as f64,
                expected: "1 <= k < n",
            });
        }
        let sq_norms = rep.maps().iter().map(FeatureMap::squared_norm).collect();
        let index = SimilarityIndex::new(&rep);
        Ok(Self {
            k,
            rep,
            yhat,
            sq_norms,
            index,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rep(&self) -> &KernelRep {
        &self.rep
    }

    /// The `k` nearest training positions, nearest first (ties by position).
    /// `exclude` removes one training position from consideration.
    pub fn neighbors(&self, map: &FeatureMap, exclude: Option<usize>) -> Result<Vec<usize>> {
        self.rep.check_map(map)?;
        let dots = self.index.similarities(map);
        let q = map.squared_norm();
        let mut cand: Vec<(f64, usize)> = dots
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != exclude)
            .map(|(i, &d)| ((self.sq_norms[i] + q - 2.0 * d).max(0.0), i))
            .collect();
        let k = self.k.min(cand.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        Ok(cand.into_iter().map(|(_, i)| i).collect())
    }

    /// Fraction of the `k` neighbors whose predicted label is `+1`.
    pub fn predict_proba(&self, map: &FeatureMap) -> Result<f64> {
        let nb = self.neighbors(map, None)?;
        let pos = nb.iter().filter(|&&i| self.yhat[i] > 0).count();
        Ok(pos as f64 / nb.len() as f64)
    }

    pub fn predict_probas(&self, ensemble: &TreeEnsemble, data: &Dataset) -> Result<Vec<f64>> {
        self.rep.check_ensemble(ensemble)?;
        let rep = transform(ensemble, data, self.rep.kind())?;
        rep.maps().iter().map(|m| self.predict_proba(m)).collect()
    }

    pub fn fidelity(&self, ensemble: &TreeEnsemble, eval: &Dataset) -> Result<FidelityReport> {
        let surrogate = self.predict_probas(ensemble, eval)?;
        let target = ensemble.predict_probas(eval)?;
        Ok(FidelityReport {
            pearson: pearson(&surrogate, &target)?,
            n_eval: eval.n_rows(),
            family: "KNN".into(),
            kind: self.rep.kind(),
        })
    }

    /// Scores each training row by how many other rows include it among
    /// their `k` nearest neighbors.
    pub fn density_ordering(&self) -> Result<Ordering> {
        let mut counts = vec![0.0; self.rep.len()];
        for (j, m) in self.rep.maps().iter().enumerate() {
            for i in self.neighbors(m, Some(j))? {
                counts[i] += 1.0;
            }
        }
        Ordering::from_scores("teknn", self.rep.row_ids(), &counts)
    }

    /// Per-row sum over queries of +1 when the row is one of the query's
    /// neighbors and votes for the query's predicted label, -1 when it is a
    /// neighbor voting against.
    pub fn aggregate(&self, ensemble: &TreeEnsemble, queries: &Dataset) -> Result<Ordering> {
        if queries.is_empty() {
            return Err(Error::Empty("query list"));
        }
        self.rep.check_ensemble(ensemble)?;
        let labels = ensemble.predict_labels(queries)?;
        let mut scores = vec![0.0; self.rep.len()];
        for (x, &label) in queries.rows().zip(&labels) {
            let map = feature_map(ensemble, x, self.rep.kind())?;
            for i in self.neighbors(&map, None)? {
                scores[i] += (self.yhat[i] * label) as f64;
            }
        }
        Ordering::from_scores("aggregate-teknn", self.rep.row_ids(), &scores)
    }
}

/// Odd neighbor counts spread over `[3, 61]`.
pub fn default_k_grid() -> Vec<usize> {
    vec![3, 5, 7, 11, 15, 21, 31, 41, 51, 61]
}

/// Picks `k` from `k_grid` by Pearson fidelity on `validation`; ties go to
/// the smaller `k`. Grid values `>= n` are rejected.
pub fn teknn_fit(
    rep: &KernelRep,
    yhat: &[i8],
    k_grid: &[usize],
    validation: &Dataset,
    ensemble: &TreeEnsemble,
) -> Result<(Teknn, GridScores<usize>)> {
    if k_grid.is_empty() {
        return Err(Error::Empty("k grid"));
    }
    rep.check_ensemble(ensemble)?;
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if let Some(&k) = grid.iter().find(|&&k| k >= rep.len()) {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            expected: "k < n",
        });
    }
    let target = ensemble.predict_probas(validation)?;
    let val_rep = transform(ensemble, validation, rep.kind())?;
    let mut model = Teknn::new(rep.clone(), yhat.to_vec(), grid[0])?;
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for &k in &grid {
        model.k = k;
        let probas = val_rep
            .maps()
            .iter()
            .map(|m| model.predict_proba(m))
            .collect::<Result<Vec<_>>>()?;
        let score = pearson(&probas, &target).ok();
        scores.push((k, score));
        if let Some(r) = score {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((k, r));
            }
        }
    }
    let (k, _) = best.ok_or_else(|| {
        Error::Invalid("validation correlation is undefined for every k in the grid".into())
    })?;
    model.k = k;
    Ok((model, scores))
}

#[derive(Debug, Clone)]
pub struct TunedTeknn {
    pub k: usize,
    pub scores: GridScores<usize>,
    pub model: Teknn,
}

/// Same holdout protocol as [`crate::surrogate::tune_c`]: choose `k` on a
/// seeded 10% validation split, then rebuild over the whole training set.
pub fn tune_teknn(
    ensemble: &TreeEnsemble,
    train: &Dataset,
    kind: KernelKind,
    k_grid: &[usize],
    seed: u64,
) -> Result<TunedTeknn> {
    let (fit_part, val_part) = validation_split(train, seed)?;
    let fit_rep = transform(ensemble, &fit_part, kind)?;
    let fit_yhat = ensemble.predict_labels(&fit_part)?;
    let usable: Vec<usize> = k_grid.iter().copied().filter(|&k| k < fit_rep.len()).collect();
    let (chosen, scores) = teknn_fit(&fit_rep, &fit_yhat, &usable, &val_part, ensemble)?;
    let rep = transform(ensemble, train, kind)?;
    let yhat = ensemble.predict_labels(train)?;
    let model = Teknn::new(rep, yhat, chosen.k())?;
    Ok(TunedTeknn {
        k: chosen.k(),
        scores,
        model,
    })
}
