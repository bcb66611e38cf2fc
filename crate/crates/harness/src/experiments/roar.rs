use std::collections::HashSet;

use anyhow::Result;
use leafrep::explain::{aggregate_explanations, random_ordering, Ordering};
use leafrep::gbdt::TreeEnsemble;
use leafrep::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Method, SEED_OFFSETS};
use crate::curve::{self, aggregate, CurvePoint, Observation};
use crate::output::{num, opt, Artifacts, Table};
use crate::pipeline;

#[derive(Debug, Clone, PartialEq)]
pub struct RoarRow {
    pub seed: u64,
    pub method: Method,
    pub fraction: f64,
    pub n_removed: usize,
    /// `None` when the removal left a single class.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RoarOutcome {
    pub rows: Vec<RoarRow>,
    /// `(seed, baseline test accuracy)`.
    pub baselines: Vec<(u64, f64)>,
    pub fingerprints: Vec<(u64, String)>,
}

impl RoarOutcome {
    pub fn curve(&self) -> Vec<CurvePoint> {
        let obs: Vec<Observation> = self
            .rows
            .iter()
            .map(|r| Observation {
                method: r.method.to_string(),
                x: r.fraction,
                seed: r.seed,
                y: r.accuracy,
            })
            .collect();
        aggregate(&obs)
    }
}

/// Seeded sample of `n` test rows (all of them when `n` exceeds the count).
pub fn sample_queries(test: &Dataset, n: usize, seed: u64) -> Dataset {
    let mut idx: Vec<usize> = (0..test.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + SEED_OFFSETS.queries);
    let n = n.min(idx.len());
    idx.partial_shuffle(&mut rng, n);
    let mut chosen = idx[..n].to_vec();
    chosen.sort_unstable();
    test.subset(&chosen)
}

pub fn ordering(
    cfg: &ExperimentConfig,
    method: Method,
    ens: &TreeEnsemble,
    train: &Dataset,
    queries: &Dataset,
    seed: u64,
) -> Result<Ordering> {
    let kind = cfg.kernels[0];
    Ok(match method {
        Method::TrexKlr | Method::TrexSvm => {
            let family = method.family().expect("surrogate method");
            let t = pipeline::surrogate(cfg, ens, train, family, kind, seed)?;
            aggregate_explanations(&t.model, ens, queries)?
        }
        Method::Random => random_ordering(train.row_ids(), seed + SEED_OFFSETS.ordering)?,
        Method::Teknn => pipeline::teknn(cfg, ens, train, kind, seed)?.model.aggregate(ens, queries)?,
        other => anyhow::bail!("method `{other}` is not available for ROAR"),
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<RoarOutcome> {
    let data = pipeline::load_dataset(cfg)?;
    let mut out = RoarOutcome {
        rows: vec![],
        baselines: vec![],
        fingerprints: vec![],
    };
    for &seed in &cfg.seeds {
        let (train, test) = pipeline::train_test(cfg, &data, seed)?;
        let gcfg = pipeline::gbdt_config(cfg, &train, seed)?;
        let ens = pipeline::fit_ensemble(&train, &gcfg)?;
        out.fingerprints.push((seed, ens.fingerprint().to_string()));
        let baseline = ens.accuracy(&test)?;
        out.baselines.push((seed, baseline));
        let queries = sample_queries(&test, cfg.n_queries, seed);
        log::info!("seed {seed}: baseline acc {baseline:.4}, {} queries", queries.n_rows());

        for &method in &cfg.methods {
            let order = ordering(cfg, method, &ens, &train, &queries, seed)?;
            for &fraction in &cfg.fractions {
                let n_removed = (fraction * train.n_rows() as f64).round() as usize;
                let accuracy = if n_removed == 0 {
                    Some(baseline)
                } else {
                    let removed: HashSet<u64> =
                        order.ranked_row_ids[..n_removed].iter().copied().collect();
                    let keep: Vec<usize> = (0..train.n_rows())
                        .filter(|&i| !removed.contains(&train.row_ids()[i]))
                        .collect();
                    let reduced = train.subset(&keep);
                    if reduced.n_rows() < 2 || !reduced.has_both_classes() {
                        log::warn!(
                            "seed {seed}: {method} removal of {n_removed} rows leaves a single class; point recorded as missing"
                        );
                        None
                    } else {
                        Some(pipeline::fit_ensemble(&reduced, &gcfg)?.accuracy(&test)?)
                    }
                };
                out.rows.push(RoarRow {
                    seed,
                    method,
                    fraction,
                    n_removed,
                    accuracy,
                });
            }
            log::info!("seed {seed}: {method} done");
        }
    }
    Ok(out)
}

pub fn artifacts(cfg: &ExperimentConfig, o: &RoarOutcome) -> Artifacts {
    let mut art = Artifacts {
        fingerprints: o.fingerprints.clone(),
        ..Default::default()
    };
    let points = o.curve();
    art.results = Some(curve::table(&points));
    for &(seed, baseline) in &o.baselines {
        let mut raw = Table::new(&["seed", "method", "fraction", "n_removed", "accuracy"]);
        raw.push(vec![
            seed.to_string(),
            "baseline".into(),
            num(0.0),
            "0".into(),
            num(baseline),
        ]);
        for r in o.rows.iter().filter(|r| r.seed == seed) {
            raw.push(vec![
                seed.to_string(),
                r.method.to_string(),
                num(r.fraction),
                r.n_removed.to_string(),
                opt(r.accuracy),
            ]);
        }
        art.raw(seed, raw);
    }
    art.plots.push((
        "roar.svg".into(),
        curve::plot(
            &format!("Remove and retrain ({} queries)", cfg.n_queries),
            "fraction of training data removed",
            "test accuracy",
            &points,
            "",
        ),
    ));
    art
}
