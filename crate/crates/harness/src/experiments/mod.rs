//! One module per experiment; each exposes `run` (typed outcome) and
//! `artifacts` (what gets written).

pub mod case_study;
pub mod cleaning;
pub mod fidelity;
pub mod roar;
pub mod runtime;

use std::path::PathBuf;

use anyhow::Result;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{self, Artifacts};

/// Runs whichever experiment `cfg` names. `cfg` must already be resolved.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    Ok(match cfg.experiment {
        Experiment::Fidelity => fidelity::artifacts(cfg, &fidelity::run(cfg)?),
        Experiment::Cleaning => cleaning::artifacts(cfg, &cleaning::run(cfg)?),
        Experiment::Roar => roar::artifacts(cfg, &roar::run(cfg)?),
        Experiment::Runtime => runtime::artifacts(cfg, &runtime::run(cfg)?),
        Experiment::CaseStudy => case_study::artifacts(cfg, &case_study::run(cfg)?),
    })
}

/// Runs and writes everything under `cfg.output_dir`.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let art = run(cfg)?;
    output::write(&cfg.output_dir, cfg, &art)
}
