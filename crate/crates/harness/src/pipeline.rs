//! Steps shared by every experiment.

use anyhow::{Context, Result};
use leafrep::data::{load_csv, split, CsvOptions};
use leafrep::explain::{tune_teknn, TunedTeknn};
use leafrep::gbdt::{self, GbdtConfig, TreeEnsemble};
use leafrep::kernel::KernelKind;
use leafrep::surrogate::{tune_c, Family, SolverOptions, TunedSurrogate};
use leafrep::Dataset;

use crate::config::{ExperimentConfig, SEED_OFFSETS};

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let opts = CsvOptions {
        categorical: cfg.categorical.clone(),
    };
    load_csv(&cfg.dataset_path, &cfg.label_column, &cfg.positive_value, &opts)
        .with_context(|| format!("loading {}", cfg.dataset_path.display()))
}

pub fn train_test(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    Ok(split(data, cfg.test_fraction, seed + SEED_OFFSETS.split)?)
}

/// The fixed GBDT config, or the cross-validated choice when tuning is on.
/// Retraining within a repetition reuses whatever this returns.
pub fn gbdt_config(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<GbdtConfig> {
    if !cfg.tune_gbdt {
        return Ok(cfg.gbdt.clone());
    }
    let chosen = gbdt::tune(train, &cfg.gbdt_grid, cfg.cv_folds, seed + SEED_OFFSETS.tuning)?;
    log::info!(
        "seed {seed}: tuned GBDT to {} trees, depth {:?}",
        chosen.num_trees,
        chosen.max_depth
    );
    Ok(chosen)
}

pub fn fit_ensemble(train: &Dataset, config: &GbdtConfig) -> Result<TreeEnsemble> {
    Ok(gbdt::fit(train, config)?)
}

pub fn solver(cfg: &ExperimentConfig, seed: u64) -> SolverOptions {
    SolverOptions {
        seed: seed + SEED_OFFSETS.solver,
        ..cfg.solver.clone()
    }
}

pub fn surrogate(
    cfg: &ExperimentConfig,
    ensemble: &TreeEnsemble,
    train: &Dataset,
    family: Family,
    kind: KernelKind,
    seed: u64,
) -> Result<TunedSurrogate> {
    let tuned = tune_c(
        ensemble,
        train,
        family,
        kind,
        &cfg.c_grid,
        &solver(cfg, seed),
        seed + SEED_OFFSETS.tuning,
    )?;
    log::info!("seed {seed}: {family}/{kind} tuned C = {}", tuned.c);
    Ok(tuned)
}

pub fn teknn(
    cfg: &ExperimentConfig,
    ensemble: &TreeEnsemble,
    train: &Dataset,
    kind: KernelKind,
    seed: u64,
) -> Result<TunedTeknn> {
    let tuned = tune_teknn(ensemble, train, kind, &cfg.k_grid, seed + SEED_OFFSETS.tuning)?;
    log::info!("seed {seed}: TEKNN/{kind} tuned k = {}", tuned.k);
    Ok(tuned)
}
