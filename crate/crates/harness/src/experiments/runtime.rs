use std::time::Instant;

use anyhow::Result;
use leafrep::explain::local_explanation;
use leafrep::kernel::feature_map;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Method, SEED_OFFSETS};
use crate::curve::mean_stderr;
use crate::output::{num, Artifacts, Table};
use crate::pipeline;

pub const SETUP: &str = "setup";
pub const EXPLAIN: &str = "explain";

/// Deterministic part of one method's run; timings live apart so results
/// stay byte-identical across invocations.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub seed: u64,
    pub method: Method,
    /// Tuned `C`, or `k` for TEKNN.
    pub param: f64,
    pub query_row_id: u64,
    /// Most supportive training row: largest contribution, or nearest neighbor.
    pub top_row_id: u64,
    pub top_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub seed: u64,
    pub method: Method,
    pub phase: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RuntimeOutcome {
    pub rows: Vec<RuntimeRow>,
    pub timings: Vec<Timing>,
    pub fingerprints: Vec<(u64, String)>,
}

impl RuntimeOutcome {
    /// `(mean, sample sd, repetitions)` of one method's phase.
    pub fn summary(&self, method: Method, phase: &str) -> Option<(f64, f64, usize)> {
        let xs: Vec<f64> = self
            .timings
            .iter()
            .filter(|t| t.method == method && t.phase == phase)
            .map(|t| t.seconds)
            .collect();
        if xs.is_empty() {
            return None;
        }
        let (mean, se) = mean_stderr(&xs);
        Some((mean, se * (xs.len() as f64).sqrt(), xs.len()))
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RuntimeOutcome> {
    let data = pipeline::load_dataset(cfg)?;
    let kind = cfg.kernels[0];
    let mut out = RuntimeOutcome {
        rows: vec![],
        timings: vec![],
        fingerprints: vec![],
    };
    for &seed in &cfg.seeds {
        let (train, test) = pipeline::train_test(cfg, &data, seed)?;
        let gcfg = pipeline::gbdt_config(cfg, &train, seed)?;
        let ens = pipeline::fit_ensemble(&train, &gcfg)?;
        out.fingerprints.push((seed, ens.fingerprint().to_string()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed + SEED_OFFSETS.queries);
        let q = rng.gen_range(0..test.n_rows());
        let x = test.row(q);
        let qid = test.row_ids()[q];

        for &method in &cfg.methods {
            let t0 = Instant::now();
            let row = match method.family() {
                Some(family) => {
                    let tuned = pipeline::surrogate(cfg, &ens, &train, family, kind, seed)?;
                    let setup = t0.elapsed().as_secs_f64();
                    let t1 = Instant::now();
                    let e = local_explanation(&tuned.model, &ens, x, qid.to_string())?;
                    let explain = t1.elapsed().as_secs_f64();
                    push_timings(&mut out.timings, seed, method, setup, explain);
                    let (top_row_id, top_score) = match e.top_positive(1).first() {
                        Some(&i) => (e.row_ids[i], e.contributions[i]),
                        None => (e.row_ids[0], e.contributions[0]),
                    };
                    RuntimeRow {
                        seed,
                        method,
                        param: tuned.c,
                        query_row_id: qid,
                        top_row_id,
                        top_score,
                    }
                }
                None => {
                    let tuned = pipeline::teknn(cfg, &ens, &train, kind, seed)?;
                    let setup = t0.elapsed().as_secs_f64();
                    let t1 = Instant::now();
                    let map = feature_map(&ens, x, kind)?;
                    let nb = tuned.model.neighbors(&map, None)?;
                    let proba = tuned.model.predict_proba(&map)?;
                    let explain = t1.elapsed().as_secs_f64();
                    push_timings(&mut out.timings, seed, method, setup, explain);
                    RuntimeRow {
                        seed,
                        method,
                        param: tuned.k as f64,
                        query_row_id: qid,
                        top_row_id: tuned.model.rep().row_ids()[nb[0]],
                        top_score: proba,
                    }
                }
            };
            out.rows.push(row);
        }
    }
    Ok(out)
}

fn push_timings(ts: &mut Vec<Timing>, seed: u64, method: Method, setup: f64, explain: f64) {
    log::info!("seed {seed}: {method} setup {setup:.3}s, explain {explain:.6}s");
    ts.push(Timing {
        seed,
        method,
        phase: SETUP,
        seconds: setup,
    });
    ts.push(Timing {
        seed,
        method,
        phase: EXPLAIN,
        seconds: explain,
    });
}

/// `results.csv` holds only deterministic columns; wall-clock numbers go to
/// `timings.csv` and `raw/timings_seed_<k>.csv`.
pub fn artifacts(cfg: &ExperimentConfig, o: &RuntimeOutcome) -> Artifacts {
    let mut art = Artifacts {
        fingerprints: o.fingerprints.clone(),
        ..Default::default()
    };
    let mut results = Table::new(&["seed", "method", "param", "query_row_id", "top_row_id", "top_score"]);
    for r in &o.rows {
        results.push(vec![
            r.seed.to_string(),
            r.method.to_string(),
            num(r.param),
            r.query_row_id.to_string(),
            r.top_row_id.to_string(),
            num(r.top_score),
        ]);
    }
    art.results = Some(results);

    let mut summary = Table::new(&["method", "phase", "mean_seconds", "sd_seconds", "repetitions"]);
    for &method in &cfg.methods {
        for phase in [SETUP, EXPLAIN] {
            if let Some((mean, sd, n)) = o.summary(method, phase) {
                summary.push(vec![method.to_string(), phase.into(), num(mean), num(sd), n.to_string()]);
            }
        }
    }
    art.tables.push(("timings.csv".into(), summary));

    for &seed in &cfg.seeds {
        let mut raw = Table::new(&["seed", "method", "param", "query_row_id", "top_row_id", "top_score"]);
        for r in o.rows.iter().filter(|r| r.seed == seed) {
            raw.push(vec![
                seed.to_string(),
                r.method.to_string(),
                num(r.param),
                r.query_row_id.to_string(),
                r.top_row_id.to_string(),
                num(r.top_score),
            ]);
        }
        art.raw(seed, raw);
        let mut t = Table::new(&["seed", "method", "phase", "seconds"]);
        for x in o.timings.iter().filter(|t| t.seed == seed) {
            t.push(vec![seed.to_string(), x.method.to_string(), x.phase.into(), num(x.seconds)]);
        }
        art.tables.push((format!("raw/timings_seed_{seed}.csv"), t));
    }
    art
}
