use anyhow::Result;
use leafrep::kernel::KernelKind;
use leafrep::surrogate::fidelity;

use crate::config::{ExperimentConfig, Method};
use crate::curve::mean_stderr;
use crate::output::{num, Artifacts, Table};
use crate::pipeline;
use crate::svg;

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityRow {
    pub seed: u64,
    pub method: Method,
    pub kernel: KernelKind,
    /// Tuned `C`, or `k` for TEKNN.
    pub param: f64,
    pub pearson: f64,
    pub n_eval: usize,
}

#[derive(Debug, Clone)]
pub struct Scatter {
    pub seed: u64,
    pub method: Method,
    pub kernel: KernelKind,
    pub row_ids: Vec<u64>,
    pub ensemble: Vec<f64>,
    pub surrogate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FidelityOutcome {
    pub rows: Vec<FidelityRow>,
    pub scatters: Vec<Scatter>,
    pub fingerprints: Vec<(u64, String)>,
}

impl FidelityOutcome {
    pub fn mean_pearson(&self, method: Method, kernel: KernelKind) -> Option<f64> {
        let ys: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.kernel == kernel)
            .map(|r| r.pearson)
            .collect();
        (!ys.is_empty()).then(|| mean_stderr(&ys).0)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<FidelityOutcome> {
    let data = pipeline::load_dataset(cfg)?;
    let mut out = FidelityOutcome {
        rows: vec![],
        scatters: vec![],
        fingerprints: vec![],
    };
    for &seed in &cfg.seeds {
        let (train, test) = pipeline::train_test(cfg, &data, seed)?;
        let gcfg = pipeline::gbdt_config(cfg, &train, seed)?;
        let ens = pipeline::fit_ensemble(&train, &gcfg)?;
        out.fingerprints.push((seed, ens.fingerprint().to_string()));
        let target = ens.predict_probas(&test)?;
        for &kernel in &cfg.kernels {
            for &method in &cfg.methods {
                let (param, report, probas) = match method.family() {
                    Some(family) => {
                        let t = pipeline::surrogate(cfg, &ens, &train, family, kernel, seed)?;
                        let report = fidelity(&t.model, &ens, &test)?;
                        (t.c, report, t.model.predict_probas(&ens, &test)?)
                    }
                    None => {
                        let t = pipeline::teknn(cfg, &ens, &train, kernel, seed)?;
                        let report = t.model.fidelity(&ens, &test)?;
                        (t.k as f64, report, t.model.predict_probas(&ens, &test)?)
                    }
                };
                log::info!(
                    "seed {seed}: {} / {kernel} test pearson {:.4}",
                    method.model_name(),
                    report.pearson
                );
                out.rows.push(FidelityRow {
                    seed,
                    method,
                    kernel,
                    param,
                    pearson: report.pearson,
                    n_eval: report.n_eval,
                });
                out.scatters.push(Scatter {
                    seed,
                    method,
                    kernel,
                    row_ids: test.row_ids().to_vec(),
                    ensemble: target.clone(),
                    surrogate: probas,
                });
            }
        }
    }
    Ok(out)
}

pub fn artifacts(cfg: &ExperimentConfig, o: &FidelityOutcome) -> Artifacts {
    let mut art = Artifacts {
        fingerprints: o.fingerprints.clone(),
        ..Default::default()
    };
    let mut results = Table::new(&["method", "kernel", "mean_pearson", "stderr_pearson", "seed_count"]);
    for &kernel in &cfg.kernels {
        for &method in &cfg.methods {
            let ys: Vec<f64> = o
                .rows
                .iter()
                .filter(|r| r.method == method && r.kernel == kernel)
                .map(|r| r.pearson)
                .collect();
            let (m, se) = mean_stderr(&ys);
            results.push(vec![
                method.model_name().into(),
                kernel.to_string(),
                num(m),
                num(se),
                ys.len().to_string(),
            ]);
        }
    }
    art.results = Some(results);

    for &seed in &cfg.seeds {
        let mut raw = Table::new(&["seed", "method", "kernel", "param", "pearson", "n_eval"]);
        for r in o.rows.iter().filter(|r| r.seed == seed) {
            raw.push(vec![
                seed.to_string(),
                r.method.model_name().into(),
                r.kernel.to_string(),
                num(r.param),
                num(r.pearson),
                r.n_eval.to_string(),
            ]);
        }
        art.raw(seed, raw);
        let mut sc = Table::new(&["method", "kernel", "row_id", "ensemble_proba", "surrogate_proba"]);
        for s in o.scatters.iter().filter(|s| s.seed == seed) {
            for i in 0..s.row_ids.len() {
                sc.push(vec![
                    s.method.model_name().into(),
                    s.kernel.to_string(),
                    s.row_ids[i].to_string(),
                    num(s.ensemble[i]),
                    num(s.surrogate[i]),
                ]);
            }
        }
        art.tables.push((format!("raw/scatter_seed_{seed}.csv"), sc));
    }

    let first = cfg.seeds[0];
    for s in o.scatters.iter().filter(|s| s.seed == first) {
        let pts: Vec<(f64, f64)> = s.ensemble.iter().copied().zip(s.surrogate.iter().copied()).collect();
        art.plots.push((
            format!("fidelity_{}_{}.svg", s.method.model_name(), s.kernel),
            svg::scatter(
                &format!("{} / {} (seed {first})", s.method.model_name(), s.kernel),
                "ensemble probability",
                "surrogate probability",
                &pts,
                None,
            ),
        ));
    }
    art
}
