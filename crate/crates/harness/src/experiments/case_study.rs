use std::collections::HashSet;

use anyhow::{bail, Context, Result};
use leafrep::data::inject_domain_mismatch;
use leafrep::explain::{local_explanation, Explanation};
use leafrep::gbdt::TreeEnsemble;
use leafrep::surrogate::Family;
use leafrep::Dataset;

use crate::config::{ExperimentConfig, SEED_OFFSETS};
use crate::output::{num, Artifacts, Table};
use crate::pipeline;
use crate::svg;

#[derive(Debug, Clone)]
pub struct CaseStudySeed {
    pub seed: u64,
    pub c: f64,
    pub query_row_id: u64,
    pub query_value: f64,
    pub true_label: i8,
    pub predicted_label: i8,
    /// Ensemble probability of the positive class for the query.
    pub query_proba: f64,
    /// Rows among the top supporting contributions; at most `top_k`.
    pub top_rows: Vec<u64>,
    pub subgroup_in_top: usize,
    pub explanation: Explanation,
    /// Parallel to the explanation's rows.
    pub predicate_values: Vec<f64>,
    pub train_labels: Vec<i8>,
    pub in_subgroup: Vec<bool>,
    pub flipped: Vec<bool>,
    pub fingerprint: String,
}

impl CaseStudySeed {
    /// Subgroup share of the top list, over its actual length.
    pub fn share(&self) -> f64 {
        if self.top_rows.is_empty() {
            0.0
        } else {
            self.subgroup_in_top as f64 / self.top_rows.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseStudyOutcome {
    pub seeds: Vec<CaseStudySeed>,
}

/// Test rows inside the subgroup that the ensemble gets wrong, most
/// confident first (ties by row id).
pub fn misclassified_subgroup(
    ens: &TreeEnsemble,
    test: &Dataset,
    col: usize,
    threshold: f64,
) -> Result<Vec<(usize, f64)>> {
    let probas = ens.predict_probas(test)?;
    let mut hits: Vec<(usize, f64)> = (0..test.n_rows())
        .filter(|&i| test.value(i, col) < threshold)
        .filter(|&i| (probas[i] >= 0.5) != (test.label(i) > 0))
        .map(|i| (i, (probas[i] - 0.5).abs()))
        .collect();
    hits.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(test.row_ids()[a.0].cmp(&test.row_ids()[b.0]))
    });
    Ok(hits)
}

/// Positions of the `k` largest contributions toward the predicted label,
/// strictly positive only, ties by row id.
pub fn top_supporting(e: &Explanation, k: usize) -> Vec<usize> {
    let s = e.predicted_label as f64;
    let mut idx: Vec<usize> = (0..e.contributions.len())
        .filter(|&i| s * e.contributions[i] > 0.0)
        .collect();
    idx.sort_by(|&a, &b| {
        (s * e.contributions[b])
            .total_cmp(&(s * e.contributions[a]))
            .then(e.row_ids[a].cmp(&e.row_ids[b]))
    });
    idx.truncate(k);
    idx
}

pub fn run(cfg: &ExperimentConfig) -> Result<CaseStudyOutcome> {
    let cs = &cfg.case_study;
    let data = pipeline::load_dataset(cfg)?;
    let col = data
        .column_index(&cs.column)
        .with_context(|| format!("case-study column `{}` not in dataset", cs.column))?;
    let family = cfg.methods[0].family().unwrap_or(Family::Klr);
    let mut out = CaseStudyOutcome { seeds: vec![] };
    for &seed in &cfg.seeds {
        let (train, test) = pipeline::train_test(cfg, &data, seed)?;
        let (train, record) = inject_domain_mismatch(
            &train,
            &cs.column,
            cs.threshold,
            cs.keep,
            cs.flip,
            seed + SEED_OFFSETS.corruption,
        )?;
        let gcfg = pipeline::gbdt_config(cfg, &train, seed)?;
        let ens = pipeline::fit_ensemble(&train, &gcfg)?;
        let hits = misclassified_subgroup(&ens, &test, col, cs.threshold)?;
        let Some(&(q, _)) = hits.first() else {
            bail!(
                "seed {seed}: no test row with {} < {} is misclassified; \
                 strengthen the injection (more flipped labels via `flip`, or a larger `keep`)",
                cs.column,
                cs.threshold
            );
        };
        let tuned = pipeline::surrogate(cfg, &ens, &train, family, cfg.kernels[0], seed)?;
        let qid = test.row_ids()[q];
        let e = local_explanation(&tuned.model, &ens, test.row(q), qid.to_string())?;
        let predicate_values: Vec<f64> = (0..train.n_rows()).map(|i| train.value(i, col)).collect();
        let in_subgroup: Vec<bool> = predicate_values.iter().map(|&v| v < cs.threshold).collect();
        let top = top_supporting(&e, cs.top_k);
        let subgroup_in_top = top.iter().filter(|&&i| in_subgroup[i]).count();
        let query_proba = ens.predict_probas(&test.subset(&[q]))?[0];
        let case = CaseStudySeed {
            seed,
            c: tuned.c,
            query_row_id: qid,
            query_value: test.value(q, col),
            true_label: test.label(q),
            predicted_label: e.predicted_label,
            query_proba,
            top_rows: top.iter().map(|&i| e.row_ids[i]).collect(),
            subgroup_in_top,
            predicate_values,
            train_labels: train.labels().to_vec(),
            in_subgroup,
            flipped: record.flipped_mask.clone(),
            fingerprint: ens.fingerprint().to_string(),
            explanation: e,
        };
        log::info!(
            "seed {seed}: query row {qid} ({} misclassified subgroup rows), subgroup share of top {} = {:.3}",
            hits.len(),
            case.top_rows.len(),
            case.share()
        );
        out.seeds.push(case);
    }
    Ok(out)
}

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn bin_edges(values: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    (0..bins)
        .map(|b| (lo + b as f64 * width, lo + (b + 1) as f64 * width))
        .collect()
}

fn bin_of(edges: &[(f64, f64)], v: f64) -> usize {
    let lo = edges[0].0;
    let width = edges[0].1 - edges[0].0;
    (((v - lo) / width).floor().max(0.0) as usize).min(edges.len() - 1)
}

/// Per-bin sums of `weight`, split by training label.
pub fn histogram(edges: &[(f64, f64)], values: &[f64], labels: &[i8], weight: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pos = vec![0.0; edges.len()];
    let mut neg = vec![0.0; edges.len()];
    for i in 0..values.len() {
        let b = bin_of(edges, values[i]);
        if labels[i] > 0 {
            pos[b] += weight[i];
        } else {
            neg[b] += weight[i];
        }
    }
    (pos, neg)
}

pub fn artifacts(cfg: &ExperimentConfig, o: &CaseStudyOutcome) -> Artifacts {
    let cs = &cfg.case_study;
    let mut art = Artifacts {
        fingerprints: o.seeds.iter().map(|s| (s.seed, s.fingerprint.clone())).collect(),
        ..Default::default()
    };
    let mut results = Table::new(&[
        "seed",
        "c",
        "query_row_id",
        "query_value",
        "true_label",
        "predicted_label",
        "query_proba",
        "top_k",
        "subgroup_in_top",
        "subgroup_share",
    ]);
    for s in &o.seeds {
        results.push(vec![
            s.seed.to_string(),
            num(s.c),
            s.query_row_id.to_string(),
            num(s.query_value),
            s.true_label.to_string(),
            s.predicted_label.to_string(),
            num(s.query_proba),
            s.top_rows.len().to_string(),
            s.subgroup_in_top.to_string(),
            num(s.share()),
        ]);
    }
    art.results = Some(results);

    for s in &o.seeds {
        let e = &s.explanation;
        let top: HashSet<u64> = s.top_rows.iter().copied().collect();
        let mut raw = Table::new(&[
            "row_id",
            cs.column.as_str(),
            "label",
            "in_subgroup",
            "flipped",
            "in_top",
            "gamma",
            "alpha_yhat",
            "contribution",
        ]);
        for i in 0..e.row_ids.len() {
            raw.push(vec![
                e.row_ids[i].to_string(),
                num(s.predicate_values[i]),
                s.train_labels[i].to_string(),
                u8::from(s.in_subgroup[i]).to_string(),
                u8::from(s.flipped[i]).to_string(),
                u8::from(top.contains(&e.row_ids[i])).to_string(),
                num(e.similarities[i]),
                num(e.signed_weights[i]),
                num(e.contributions[i]),
            ]);
        }
        art.raw(s.seed, raw);

        let edges = bin_edges(&s.predicate_values, cs.bins);
        let ones = vec![1.0; e.row_ids.len()];
        let (cp, cn) = histogram(&edges, &s.predicate_values, &s.train_labels, &ones);
        let (wp, wn) = histogram(&edges, &s.predicate_values, &s.train_labels, &e.signed_weights);
        let (gp, gn) = histogram(&edges, &s.predicate_values, &s.train_labels, &e.contributions);
        let mut h = Table::new(&[
            "bin_lo",
            "bin_hi",
            "count_pos",
            "count_neg",
            "alpha_yhat_pos",
            "alpha_yhat_neg",
            "contribution_pos",
            "contribution_neg",
        ]);
        for b in 0..edges.len() {
            h.push(vec![
                num(edges[b].0),
                num(edges[b].1),
                num(cp[b]),
                num(cn[b]),
                num(wp[b]),
                num(wn[b]),
                num(gp[b]),
                num(gn[b]),
            ]);
        }
        art.tables.push((format!("raw/histogram_seed_{}.csv", s.seed), h));

        if s.seed == o.seeds[0].seed {
            let pts: Vec<(f64, f64)> = e
                .similarities
                .iter()
                .copied()
                .zip(e.signed_weights.iter().copied())
                .collect();
            art.plots.push((
                "case_scatter.svg".into(),
                svg::scatter(
                    &format!("Training rows for query {}", s.query_row_id),
                    "similarity (gamma)",
                    "alpha * yhat",
                    &pts,
                    Some((&s.in_subgroup, "other", "subgroup")),
                ),
            ));
            let x = cs.column.as_str();
            for (name, title, pos, neg) in [
                ("case_hist_labels.svg", "Training label counts", &cp, &cn),
                ("case_hist_alpha_yhat.svg", "Weighted by alpha * yhat", &wp, &wn),
                ("case_hist_contribution.svg", "Weighted by contribution", &gp, &gn),
            ] {
                art.plots.push((
                    name.into(),
                    svg::histogram(
                        title,
                        x,
                        "sum",
                        &edges,
                        &[("label +1", pos.clone()), ("label -1", neg.clone())],
                    ),
                ));
            }
        }
    }
    art
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_cover_range_and_close_last() {
        let v = [0.0, 1.0, 2.5, 10.0];
        let edges = bin_edges(&v, 4);
        assert_eq!(edges.first().unwrap().0, 0.0);
        assert_eq!(edges.last().unwrap().1, 10.0);
        let (pos, neg) = histogram(&edges, &v, &[1, -1, 1, -1], &[1.0; 4]);
        assert_eq!(pos, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(neg, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_gets_one_usable_bin() {
        let edges = bin_edges(&[3.0, 3.0], 5);
        let (pos, _) = histogram(&edges, &[3.0, 3.0], &[1, 1], &[1.0, 2.0]);
        assert_eq!(pos[0], 3.0);
    }
}
