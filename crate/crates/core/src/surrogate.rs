//! Kernelized surrogates of a tree ensemble, fit in the dual.
//!
//! Both families are trained on the ensemble's own predicted labels `yhat`
//! with `Q_ij = yhat_i yhat_j k(x_i, x_j)`:
//!
//! * KLR minimizes `1/2 a'Qa + sum_i [a_i log a_i + (C - a_i) log(C - a_i)]`
//!   over the open box `(0, C)^n`.
//! * SVM (L1 hinge) minimizes `1/2 a'Qa - sum_i a_i` over `[0, C]^n`.
//!
//! `Q` is never formed. Because every kernel here is an explicit inner
//! product, the solvers keep the primal vector `w = sum_i a_i yhat_i phi_i`
//! up to date, so `(Qa)_i = yhat_i w . phi_i` costs one sparse dot product.
//! Coordinates are visited in a fresh seeded permutation each epoch.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{seeded_rng, split, Dataset};
use crate::error::{Error, Result};
use crate::gbdt::TreeEnsemble;
use crate::kernel::{transform, FeatureMap, KernelKind, KernelRep};
use crate::stats::{pearson, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "KLR")]
    Klr,
    #[serde(rename = "SVM")]
    Svm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Klr => "KLR",
            Family::Svm => "SVM",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop once the largest projected-gradient magnitude seen in an epoch
    /// is at most this.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch coordinate permutation.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub epochs: usize,
    pub max_violation: f64,
    pub converged: bool,
}

/// A fitted surrogate. `alphas[i]` is the representer value of training row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    family: Family,
    c: f64,
    alphas: Vec<f64>,
    target_labels: Vec<i8>,
    train_rep: KernelRep,
    primal_weights: Vec<f64>,
    stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub pearson: f64,
    pub n_eval: usize,
    /// `KLR`, `SVM` or `KNN`.
    pub family: String,
    pub kind: KernelKind,
}

fn check_inputs(rep: &KernelRep, yhat: &[i8], c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::OutOfRange {
            name: "C",
            value: c,
            expected: "0 < C < inf",
        });
    }
    if yhat.len() != rep.len() {
        return Err(Error::DimensionMismatch {
            expected: rep.len(),
            got: yhat.len(),
        });
    }
    if let Some(&bad) = yhat.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidLabel(bad as i64));
    }
    if rep.is_empty() {
        return Err(Error::Empty("training representation"));
    }
    Ok(())
}

fn primal_from(rep: &KernelRep, alphas: &[f64], yhat: &[i8]) -> Vec<f64> {
    let mut w = vec![0.0; rep.dimension()];
    for ((m, &a), &y) in rep.maps().iter().zip(alphas).zip(yhat) {
        if a != 0.0 {
            m.add_scaled_to(&mut w, a * y as f64);
        }
    }
    w
}

pub fn fit(
    rep: &KernelRep,
    yhat: &[i8],
    c: f64,
    family: Family,
    options: &SolverOptions,
) -> Result<SurrogateModel> {
    match family {
        Family::Klr => fit_klr(rep, yhat, c, options),
        Family::Svm => fit_svm(rep, yhat, c, options),
    }
}

/// Kernel logistic regression by dual coordinate descent.
///
/// Each coordinate is stored as its logit `s_i = log(a_i / (C - a_i))`, which
/// keeps both `a_i` and `C - a_i` accurate near the box edges and makes the
/// gradient simply `(Qa)_i + s_i`. The one-dimensional subproblem is solved
/// by bracketed Newton iteration in `s`.
pub fn fit_klr(
    rep: &KernelRep,
    yhat: &[i8],
    c: f64,
    options: &SolverOptions,
) -> Result<SurrogateModel> {
    check_inputs(rep, yhat, c)?;
    let n = rep.len();
    let maps = rep.maps();
    let qdiag: Vec<f64> = maps.iter().map(FeatureMap::squared_norm).collect();
    let ys: Vec<f64> = yhat.iter().map(|&y| y as f64).collect();

    let mut logits = vec![0.0; n];
    let init = vec![c / 2.0; n];
    let mut w = primal_from(rep, &init, yhat);

    let mut rng = seeded_rng(options.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = SolveStats {
        epochs: 0,
        max_violation: f64::INFINITY,
        converged: false,
    };
    for epoch in 0..options.max_epochs {
        order.shuffle(&mut rng);
        let mut max_violation = 0.0f64;
        for &i in &order {
            let b = ys[i] * maps[i].dot_dense(&w);
            let s_old = logits[i];
            max_violation = max_violation.max((b + s_old).abs());
            let s_new = solve_klr_coordinate(qdiag[i], b, s_old, c);
            let delta = c * (sigmoid(s_new) - sigmoid(s_old));
            if delta != 0.0 {
                maps[i].add_scaled_to(&mut w, delta * ys[i]);
            }
            logits[i] = s_new;
        }
        stats = SolveStats {
            epochs: epoch + 1,
            max_violation,
            converged: max_violation <= options.tol,
        };
        if stats.converged {
            break;
        }
    }
    if !stats.converged {
        log::warn!(
            "KLR dual solver hit the epoch cap ({}) with violation {:.3e}",
            options.max_epochs,
            stats.max_violation
        );
    }

    let alphas: Vec<f64> = logits.iter().map(|&s| c * sigmoid(s)).collect();
    let primal_weights = primal_from(rep, &alphas, yhat);
    Ok(SurrogateModel {
        family: Family::Klr,
        c,
        alphas,
        target_labels: yhat.to_vec(),
        train_rep: rep.clone(),
        primal_weights,
        stats,
    })
}

/// Minimizes `1/2 q (a - a0)^2 + b (a - a0) + a log a + (C - a) log(C - a)`
/// over `a = C sigmoid(s)`, i.e. finds the root of
/// `F(s) = s + b + q (C sigmoid(s) - a0)`, which is strictly increasing.
fn solve_klr_coordinate(q: f64, b: f64, s0: f64, c: f64) -> f64 {
    let a0 = c * sigmoid(s0);
    let f = |s: f64| s + b + q * (c * sigmoid(s) - a0);
    // F(s) lies between s + b - q a0 and s + b + q (C - a0).
    let mut lo = -b - q * (c - a0);
    let mut hi = -b + q * a0;
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut s = s0.clamp(lo, hi);
    for _ in 0..200 {
        let fs = f(s);
        if fs == 0.0 {
            return s;
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let sig = sigmoid(s);
        let slope = 1.0 + q * c * sig * (1.0 - sig);
        let mut next = s - fs / slope;
        if !(next > lo && next < hi) {
            next = lo + (hi - lo) / 2.0;
        }
        if (next - s).abs() <= 1e-15 * (1.0 + s.abs()) || hi - lo <= 1e-15 * (1.0 + s.abs()) {
            return next;
        }
        s = next;
    }
    s
}

/// L1-hinge SVM by dual coordinate descent with clipped closed-form updates.
pub fn fit_svm(
    rep: &KernelRep,
    yhat: &[i8],
    c: f64,
    options: &SolverOptions,
) -> Result<SurrogateModel> {
    check_inputs(rep, yhat, c)?;
    let n = rep.len();
    let maps = rep.maps();
    let qdiag: Vec<f64> = maps.iter().map(FeatureMap::squared_norm).collect();
    let ys: Vec<f64> = yhat.iter().map(|&y| y as f64).collect();

    let mut alphas = vec![0.0; n];
    let mut w = vec![0.0; rep.dimension()];
    let mut rng = seeded_rng(options.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = SolveStats {
        epochs: 0,
        max_violation: f64::INFINITY,
        converged: false,
    };
    for epoch in 0..options.max_epochs {
        order.shuffle(&mut rng);
        let mut max_violation = 0.0f64;
        for &i in &order {
            let g = ys[i] * maps[i].dot_dense(&w) - 1.0;
            let a = alphas[i];
            let pg = if a <= 0.0 {
                g.min(0.0)
            } else if a >= c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg == 0.0 {
                continue;
            }
            let a_new = if qdiag[i] > 0.0 {
                (a - g / qdiag[i]).clamp(0.0, c)
            } else if g < 0.0 {
                c
            } else {
                0.0
            };
            if a_new != a {
                maps[i].add_scaled_to(&mut w, (a_new - a) * ys[i]);
                alphas[i] = a_new;
            }
        }
        stats = SolveStats {
            epochs: epoch + 1,
            max_violation,
            converged: max_violation <= options.tol,
        };
        if stats.converged {
            break;
        }
    }
    if !stats.converged {
        log::warn!(
            "SVM dual solver hit the epoch cap ({}) with violation {:.3e}",
            options.max_epochs,
            stats.max_violation
        );
    }

    let primal_weights = primal_from(rep, &alphas, yhat);
    Ok(SurrogateModel {
        family: Family::Svm,
        c,
        alphas,
        target_labels: yhat.to_vec(),
        train_rep: rep.clone(),
        primal_weights,
        stats,
    })
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    family: Family,
    #[serde(rename = "C")]
    c: f64,
    kind: KernelKind,
    fingerprint: String,
    alphas: Vec<f64>,
    target_labels: Vec<i8>,
}

impl SurrogateModel {
    /// Builds a model from given dual weights (e.g. all zero, or loaded from
    /// disk). Checks box feasibility and recomputes the primal weights.
    pub fn from_alphas(
        family: Family,
        c: f64,
        alphas: Vec<f64>,
        target_labels: Vec<i8>,
        train_rep: KernelRep,
    ) -> Result<Self> {
        check_inputs(&train_rep, &target_labels, c)?;
        if alphas.len() != train_rep.len() {
            return Err(Error::DimensionMismatch {
                expected: train_rep.len(),
                got: alphas.len(),
            });
        }
        if let Some(&a) = alphas.iter().find(|&&a| !(0.0..=c).contains(&a)) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: a,
                expected: "0 <= alpha <= C",
            });
        }
        let primal_weights = primal_from(&train_rep, &alphas, &target_labels);
        Ok(Self {
            family,
            c,
            alphas,
            target_labels,
            train_rep,
            primal_weights,
            stats: SolveStats {
                epochs: 0,
                max_violation: f64::NAN,
                converged: false,
            },
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn target_labels(&self) -> &[i8] {
        &self.target_labels
    }

    pub fn train_rep(&self) -> &KernelRep {
        &self.train_rep
    }

    pub fn kind(&self) -> KernelKind {
        self.train_rep.kind()
    }

    pub fn primal_weights(&self) -> &[f64] {
        &self.primal_weights
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// `alpha_i * yhat_i` for every training row.
    pub fn signed_weights(&self) -> Vec<f64> {
        self.alphas
            .iter()
            .zip(&self.target_labels)
            .map(|(&a, &y)| a * y as f64)
            .collect()
    }

    /// Dual objective at the current weights.
    pub fn dual_objective(&self) -> f64 {
        let quad = 0.5 * self.primal_weights.iter().map(|w| w * w).sum::<f64>();
        match self.family {
            Family::Klr => {
                quad + self
                    .alphas
                    .iter()
                    .map(|&a| xlogx(a) + xlogx(self.c - a))
                    .sum::<f64>()
            }
            Family::Svm => quad - self.alphas.iter().sum::<f64>(),
        }
    }

    /// `sum_i alpha_i yhat_i k(x_i, x)`, computed as `w . phi(x)`.
    pub fn decision(&self, x_map: &FeatureMap) -> Result<f64> {
        self.train_rep.check_map(x_map)?;
        Ok(x_map.dot_dense(&self.primal_weights))
    }

    /// Same value as [`Self::decision`], summed term by term over the
    /// training rows.
    pub fn decision_expanded(&self, x_map: &FeatureMap) -> Result<f64> {
        let gammas = self.train_rep.similarities(x_map)?;
        Ok(gammas
            .iter()
            .zip(self.signed_weights())
            .map(|(g, s)| g * s)
            .sum())
    }

    pub fn predict_proba(&self, x_map: &FeatureMap) -> Result<f64> {
        Ok(sigmoid(self.decision(x_map)?))
    }

    /// Decision values for every row of `data`, via `ensemble`'s feature maps.
    pub fn decisions(&self, ensemble: &TreeEnsemble, data: &Dataset) -> Result<Vec<f64>> {
        self.train_rep.check_ensemble(ensemble)?;
        let rep = transform(ensemble, data, self.kind())?;
        rep.maps().iter().map(|m| self.decision(m)).collect()
    }

    pub fn predict_probas(&self, ensemble: &TreeEnsemble, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self
            .decisions(ensemble, data)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Serializes `{family, C, kind, fingerprint, alphas, target_labels}`.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            family: self.family,
            c: self.c,
            kind: self.kind(),
            fingerprint: self.train_rep.fingerprint().to_string(),
            alphas: self.alphas.clone(),
            target_labels: self.target_labels.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Restores a model; `train_rep` must be the representation it was fit on.
    pub fn from_json(json: &str, train_rep: KernelRep) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(json)?;
        if doc.kind != train_rep.kind() {
            return Err(Error::KindMismatch {
                expected: doc.kind.to_string(),
                got: train_rep.kind().to_string(),
            });
        }
        if doc.fingerprint != train_rep.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: doc.fingerprint,
                got: train_rep.fingerprint().to_string(),
            });
        }
        Self::from_alphas(doc.family, doc.c, doc.alphas, doc.target_labels, train_rep)
    }
}

/// Five log-spaced values over `[1e-2, 1e2]`.
/// Validation Pearson per grid value; `None` where it is undefined.
pub type GridScores<T> = Vec<(T, Option<f64>)>;

pub fn default_c_grid() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0]
}

/// Outcome of [`tune_c`].
#[derive(Debug, Clone)]
pub struct TunedSurrogate {
    pub c: f64,
    /// Validation fidelity of the selected `C`.
    pub validation: FidelityReport,
    /// Validation Pearson per grid point; `None` where it was undefined.
    pub scores: GridScores<f64>,
    /// Refit on the whole training set with the selected `C`.
    pub model: SurrogateModel,
}

/// Selects `C` by validation fidelity.
///
/// A seeded 10% of `train` is held out. For each grid value the surrogate is
/// fit on the rest (against the ensemble's predicted labels) and scored by
/// the Pearson correlation of its probabilities with the ensemble's on the
/// held-out rows. Ties go to the smaller `C`.
pub fn tune_c(
    ensemble: &TreeEnsemble,
    train: &Dataset,
    family: Family,
    kind: KernelKind,
    grid: &[f64],
    options: &SolverOptions,
    seed: u64,
) -> Result<TunedSurrogate> {
    if grid.is_empty() {
        return Err(Error::Empty("C grid"));
    }
    let (fit_part, val_part) = validation_split(train, seed)?;
    let fit_rep = transform(ensemble, &fit_part, kind)?;
    let fit_yhat = ensemble.predict_labels(&fit_part)?;
    let target = ensemble.predict_probas(&val_part)?;
    let val_rep = transform(ensemble, &val_part, kind)?;

    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for &c in &sorted {
        let model = fit(&fit_rep, &fit_yhat, c, family, options)?;
        let probas = val_rep
            .maps()
            .iter()
            .map(|m| model.predict_proba(m))
            .collect::<Result<Vec<_>>>()?;
        let score = pearson(&probas, &target).ok();
        scores.push((c, score));
        if let Some(r) = score {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((c, r));
            }
        }
    }
    let (c, r) = best.ok_or_else(|| {
        Error::Invalid("validation correlation is undefined for every C in the grid".into())
    })?;
    let rep = transform(ensemble, train, kind)?;
    let yhat = ensemble.predict_labels(train)?;
    let model = fit(&rep, &yhat, c, family, options)?;
    Ok(TunedSurrogate {
        c,
        validation: FidelityReport {
            pearson: r,
            n_eval: val_part.n_rows(),
            family: family.as_str().to_string(),
            kind,
        },
        scores,
        model,
    })
}

/// Seeded 90/10 fit/validation split used by the surrogate tuners.
pub fn validation_split(train: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n_val = (0.1 * train.n_rows() as f64).round() as usize;
    if n_val < 2 || n_val >= train.n_rows() {
        return Err(Error::Invalid(format!(
            "a 10% validation split of {} rows leaves {n_val} rows; need at least 2",
            train.n_rows()
        )));
    }
    split(train, 0.1, seed)
}

/// Pearson correlation between surrogate and ensemble probabilities on `eval`.
pub fn fidelity(
    model: &SurrogateModel,
    ensemble: &TreeEnsemble,
    eval: &Dataset,
) -> Result<FidelityReport> {
    if eval.n_rows() < 2 {
        return Err(Error::Invalid(format!(
            "fidelity needs at least 2 rows, got {}",
            eval.n_rows()
        )));
    }
    let surrogate = model.predict_probas(ensemble, eval)?;
    let target = ensemble.predict_probas(eval)?;
    Ok(FidelityReport {
        pearson: pearson(&surrogate, &target)?,
        n_eval: eval.n_rows(),
        family: model.family().as_str().to_string(),
        kind: model.kind(),
    })
}
