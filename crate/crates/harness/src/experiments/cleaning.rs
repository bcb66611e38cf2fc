use std::collections::HashMap;

use anyhow::Result;
use leafrep::data::flip_labels;
use leafrep::explain::{global_importance, loss_ordering, random_ordering, surrogate_losses, Ordering};
use leafrep::gbdt::TreeEnsemble;
use leafrep::surrogate::{Family, SurrogateModel};
use leafrep::Dataset;

use crate::config::{ExperimentConfig, Method, SEED_OFFSETS};
use crate::curve::{self, aggregate, CurvePoint, Observation};
use crate::output::{num, Artifacts, Table};
use crate::pipeline;

pub const CLEAN_LINE: &str = "clean";

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningRow {
    pub seed: u64,
    pub method: Method,
    pub fraction: f64,
    pub n_checked: usize,
    /// Flipped rows among the checked ones.
    pub flips_found: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningSeed {
    pub seed: u64,
    pub n_train: usize,
    pub n_flipped: usize,
    pub corrupted_accuracy: f64,
    pub clean_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct CleaningOutcome {
    pub rows: Vec<CleaningRow>,
    pub seeds: Vec<CleaningSeed>,
    pub fingerprints: Vec<(u64, String)>,
}

impl CleaningOutcome {
    pub fn accuracy_curve(&self) -> Vec<CurvePoint> {
        let mut obs: Vec<Observation> = self
            .rows
            .iter()
            .map(|r| Observation {
                method: r.method.to_string(),
                x: r.fraction,
                seed: r.seed,
                y: Some(r.accuracy),
            })
            .collect();
        let fractions = self.fractions();
        for s in &self.seeds {
            for &x in &fractions {
                obs.push(Observation {
                    method: CLEAN_LINE.into(),
                    x,
                    seed: s.seed,
                    y: Some(s.clean_accuracy),
                });
            }
        }
        aggregate(&obs)
    }

    /// Fraction of all flipped rows found among the checked rows.
    pub fn recovery_curve(&self) -> Vec<CurvePoint> {
        let flipped: HashMap<u64, usize> = self.seeds.iter().map(|s| (s.seed, s.n_flipped)).collect();
        let obs: Vec<Observation> = self
            .rows
            .iter()
            .map(|r| Observation {
                method: r.method.to_string(),
                x: r.fraction,
                seed: r.seed,
                y: Some(r.flips_found as f64 / flipped[&r.seed].max(1) as f64),
            })
            .collect();
        aggregate(&obs)
    }

    fn fractions(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.rows.iter().map(|r| r.fraction).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

fn cached<'c>(
    cache: &'c mut HashMap<Family, SurrogateModel>,
    cfg: &ExperimentConfig,
    ens: &TreeEnsemble,
    train: &Dataset,
    family: Family,
    seed: u64,
) -> Result<&'c SurrogateModel> {
    use std::collections::hash_map::Entry;
    Ok(match cache.entry(family) {
        Entry::Occupied(e) => e.into_mut(),
        Entry::Vacant(e) => e.insert(pipeline::surrogate(cfg, ens, train, family, cfg.kernels[0], seed)?.model),
    })
}

/// The ordering in which `method` would have a person inspect `noisy`.
/// Surrogates are fit once per family and shared through `cache`.
pub fn ordering(
    cfg: &ExperimentConfig,
    method: Method,
    ens: &TreeEnsemble,
    noisy: &Dataset,
    seed: u64,
    cache: &mut HashMap<Family, SurrogateModel>,
) -> Result<Ordering> {
    Ok(match method {
        Method::TrexKlr => global_importance(cached(cache, cfg, ens, noisy, Family::Klr, seed)?),
        Method::TrexSvm => global_importance(cached(cache, cfg, ens, noisy, Family::Svm, seed)?),
        Method::Random => random_ordering(noisy.row_ids(), seed + SEED_OFFSETS.ordering)?,
        Method::GbdtLoss => loss_ordering("gbdt_loss", noisy.row_ids(), &ens.losses(noisy)?)?,
        Method::SurrogateLoss => {
            let model = cached(cache, cfg, ens, noisy, Family::Klr, seed)?;
            let losses = surrogate_losses(model, ens, noisy)?;
            loss_ordering("surrogate_loss", noisy.row_ids(), &losses)?
        }
        Method::Teknn => {
            let t = pipeline::teknn(cfg, ens, noisy, cfg.kernels[0], seed)?;
            t.model.density_ordering()?
        }
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<CleaningOutcome> {
    let data = pipeline::load_dataset(cfg)?;
    let mut out = CleaningOutcome {
        rows: vec![],
        seeds: vec![],
        fingerprints: vec![],
    };
    for &seed in &cfg.seeds {
        let (train, test) = pipeline::train_test(cfg, &data, seed)?;
        let (noisy, record) =
            flip_labels(&train, cfg.noise_fraction, seed + SEED_OFFSETS.corruption)?;
        let gcfg = pipeline::gbdt_config(cfg, &noisy, seed)?;
        let ens = pipeline::fit_ensemble(&noisy, &gcfg)?;
        out.fingerprints.push((seed, ens.fingerprint().to_string()));
        let corrupted_accuracy = ens.accuracy(&test)?;
        let clean_accuracy = pipeline::fit_ensemble(&train, &gcfg)?.accuracy(&test)?;
        log::info!(
            "seed {seed}: {} flips, corrupted acc {corrupted_accuracy:.4}, clean acc {clean_accuracy:.4}",
            record.n_flipped()
        );
        out.seeds.push(CleaningSeed {
            seed,
            n_train: train.n_rows(),
            n_flipped: record.n_flipped(),
            corrupted_accuracy,
            clean_accuracy,
        });

        let position: HashMap<u64, usize> =
            noisy.row_ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
        // accuracy by fixed-row set, so identical fixes are not retrained
        let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
        memo.insert(vec![], corrupted_accuracy);
        let mut models = HashMap::new();
        for &method in &cfg.methods {
            let order = ordering(cfg, method, &ens, &noisy, seed, &mut models)?;
            for &fraction in &cfg.fractions {
                let n_checked = (fraction * noisy.n_rows() as f64).round() as usize;
                let mut fixed: Vec<usize> = order.ranked_row_ids[..n_checked]
                    .iter()
                    .map(|id| position[id])
                    .filter(|&i| record.flipped_mask[i])
                    .collect();
                fixed.sort_unstable();
                let accuracy = match memo.get(&fixed) {
                    Some(&a) => a,
                    None => {
                        let mut labels = noisy.labels().to_vec();
                        for &i in &fixed {
                            labels[i] = -labels[i];
                        }
                        let repaired = noisy.with_labels(labels)?;
                        let a = pipeline::fit_ensemble(&repaired, &gcfg)?.accuracy(&test)?;
                        memo.insert(fixed.clone(), a);
                        a
                    }
                };
                out.rows.push(CleaningRow {
                    seed,
                    method,
                    fraction,
                    n_checked,
                    flips_found: fixed.len(),
                    accuracy,
                });
            }
            log::info!("seed {seed}: {method} done");
        }
    }
    Ok(out)
}

pub fn artifacts(cfg: &ExperimentConfig, o: &CleaningOutcome) -> Artifacts {
    let mut art = Artifacts {
        fingerprints: o.fingerprints.clone(),
        ..Default::default()
    };
    let acc = o.accuracy_curve();
    let rec = o.recovery_curve();
    art.results = Some(curve::table(&acc));
    art.tables.push(("recovery.csv".into(), curve::table(&rec)));
    for s in &o.seeds {
        let mut raw = Table::new(&["seed", "method", "fraction", "n_checked", "flips_found", "n_flipped", "accuracy"]);
        raw.push(vec![
            s.seed.to_string(),
            CLEAN_LINE.into(),
            String::new(),
            String::new(),
            String::new(),
            s.n_flipped.to_string(),
            num(s.clean_accuracy),
        ]);
        for r in o.rows.iter().filter(|r| r.seed == s.seed) {
            raw.push(vec![
                s.seed.to_string(),
                r.method.to_string(),
                num(r.fraction),
                r.n_checked.to_string(),
                r.flips_found.to_string(),
                s.n_flipped.to_string(),
                num(r.accuracy),
            ]);
        }
        art.raw(s.seed, raw);
    }
    let noise = cfg.noise_fraction * 100.0;
    art.plots.push((
        "cleaning.svg".into(),
        curve::plot(
            &format!("Test accuracy after fixing checked labels ({noise}% flipped)"),
            "fraction of training data checked",
            "test accuracy",
            &acc,
            CLEAN_LINE,
        ),
    ));
    art.plots.push((
        "recovery.svg".into(),
        curve::plot(
            "Flipped labels found",
            "fraction of training data checked",
            "fraction of flips found",
            &rec,
            "",
        ),
    ));
    art
}
