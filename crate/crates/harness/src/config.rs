use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use leafrep::gbdt::GbdtConfig;
use leafrep::kernel::KernelKind;
use leafrep::surrogate::{default_c_grid, Family, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::synth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Fidelity,
    Cleaning,
    Roar,
    Runtime,
    #[serde(alias = "case-study")]
    CaseStudy,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Fidelity => "fidelity",
            Experiment::Cleaning => "cleaning",
            Experiment::Roar => "roar",
            Experiment::Runtime => "runtime",
            Experiment::CaseStudy => "case_study",
        }
    }

    pub fn allowed_methods(self) -> &'static [Method] {
        use Method::*;
        match self {
            Experiment::Fidelity => &[TrexKlr, TrexSvm, Teknn],
            Experiment::Cleaning => &[TrexKlr, TrexSvm, Random, GbdtLoss, SurrogateLoss, Teknn],
            Experiment::Roar => &[TrexKlr, TrexSvm, Random, Teknn],
            Experiment::Runtime => &[TrexKlr, TrexSvm, Teknn],
            Experiment::CaseStudy => &[TrexKlr, TrexSvm],
        }
    }

    pub fn default_methods(self) -> Vec<Method> {
        use Method::*;
        match self {
            Experiment::Roar => vec![TrexKlr, Random, Teknn],
            Experiment::CaseStudy => vec![TrexKlr],
            other => other.allowed_methods().to_vec(),
        }
    }

    pub fn default_fractions(self) -> Vec<f64> {
        match self {
            Experiment::Cleaning => (0..=6).map(|i| i as f64 * 0.05).collect(),
            Experiment::Roar => (0..=9).map(|i| i as f64 * 0.1).collect(),
            _ => vec![],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attribution or baseline method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TrexKlr,
    TrexSvm,
    Random,
    GbdtLoss,
    SurrogateLoss,
    Teknn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::TrexKlr => "TREX-KLR",
            Method::TrexSvm => "TREX-SVM",
            Method::Random => "random",
            Method::GbdtLoss => "gbdt_loss",
            Method::SurrogateLoss => "surrogate_loss",
            Method::Teknn => "teknn",
        }
    }

    /// Surrogate-style name used in fidelity tables.
    pub fn model_name(self) -> &'static str {
        match self {
            Method::TrexKlr => "KLR",
            Method::TrexSvm => "SVM",
            Method::Teknn => "TEKNN",
            other => other.as_str(),
        }
    }

    pub fn family(self) -> Option<Family> {
        match self {
            Method::TrexKlr => Some(Family::Klr),
            Method::TrexSvm => Some(Family::Svm),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "trexklr" | "klr" => Method::TrexKlr,
            "trexsvm" | "svm" => Method::TrexSvm,
            "random" => Method::Random,
            "gbdtloss" => Method::GbdtLoss,
            "surrogateloss" => Method::SurrogateLoss,
            "teknn" | "knn" => Method::Teknn,
            _ => bail!("unknown method `{s}`"),
        })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseStudyConfig {
    /// Numeric column the subgroup predicate reads.
    pub column: String,
    /// Subgroup is `column < threshold`.
    pub threshold: f64,
    pub keep: usize,
    pub flip: usize,
    pub top_k: usize,
    pub bins: usize,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            column: "age".into(),
            threshold: 17.5,
            keep: 98,
            flip: 83,
            top_k: 100,
            bins: 20,
        }
    }
}

/// Offsets added to a repetition seed to derive the seed of each random
/// step; recorded in `meta.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedOffsets {
    pub split: u64,
    pub corruption: u64,
    pub tuning: u64,
    pub queries: u64,
    pub ordering: u64,
    pub solver: u64,
}

pub const SEED_OFFSETS: SeedOffsets = SeedOffsets {
    split: 0,
    corruption: 1_000,
    tuning: 2_000,
    queries: 3_000,
    ordering: 4_000,
    solver: 5_000,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dataset_path: PathBuf,
    pub label_column: String,
    pub positive_value: String,
    /// Columns to one-hot encode; inferred from the data when absent.
    pub categorical: Option<Vec<String>>,
    /// Empty means the experiment's default set.
    pub methods: Vec<Method>,
    pub kernels: Vec<KernelKind>,
    /// One repetition per seed.
    pub seeds: Vec<u64>,
    /// Checked (cleaning) or removed (ROAR) fractions. Empty means the
    /// experiment's default grid.
    pub fractions: Vec<f64>,
    pub output_dir: PathBuf,
    pub test_fraction: f64,
    pub gbdt: GbdtConfig,
    /// Cross-validate `gbdt_grid` (or the standard grid when empty) instead of
    /// using `gbdt` as is.
    pub tune_gbdt: bool,
    pub gbdt_grid: Vec<GbdtConfig>,
    pub cv_folds: usize,
    pub c_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub solver: SolverOptions,
    pub noise_fraction: f64,
    pub n_queries: usize,
    pub case_study: CaseStudyConfig,
}

/// Fixed ensemble used when tuning is off.
pub fn desk_gbdt() -> GbdtConfig {
    GbdtConfig {
        num_trees: 100,
        max_depth: Some(5),
        learning_rate: 0.1,
        ..GbdtConfig::default()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::default(),
            dataset_path: PathBuf::new(),
            label_column: synth::LABEL_COLUMN.into(),
            positive_value: synth::POSITIVE_VALUE.into(),
            categorical: None,
            methods: vec![],
            kernels: vec![KernelKind::LeafOutput],
            seeds: (0..5).collect(),
            fractions: vec![],
            output_dir: PathBuf::from("out"),
            test_fraction: 0.2,
            gbdt: desk_gbdt(),
            tune_gbdt: false,
            gbdt_grid: vec![],
            cv_folds: 3,
            c_grid: default_c_grid(),
            k_grid: leafrep::explain::default_k_grid(),
            solver: SolverOptions::default(),
            noise_fraction: 0.4,
            n_queries: 50,
            case_study: CaseStudyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills defaults that depend on the experiment and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        if self.methods.is_empty() {
            self.methods = self.experiment.default_methods();
        }
        if self.fractions.is_empty() {
            self.fractions = self.experiment.default_fractions();
        }
        if self.tune_gbdt && self.gbdt_grid.is_empty() {
            self.gbdt_grid = GbdtConfig::standard_grid(&self.gbdt);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        ensure!(
            !self.dataset_path.as_os_str().is_empty(),
            "no dataset given (use --data or `dataset_path`)"
        );
        ensure!(!self.methods.is_empty(), "no methods given");
        for m in &self.methods {
            ensure!(
                self.experiment.allowed_methods().contains(m),
                "method `{m}` is not available for the {} experiment",
                self.experiment
            );
        }
        ensure!(!self.kernels.is_empty(), "no kernel kinds given");
        ensure!(
            self.fractions.iter().all(|f| (0.0..=1.0).contains(f)),
            "fractions must lie in [0, 1]"
        );
        ensure!(
            self.fractions.windows(2).all(|w| w[0] < w[1]),
            "fractions must be strictly ascending"
        );
        if matches!(self.experiment, Experiment::Cleaning | Experiment::Roar) {
            ensure!(!self.fractions.is_empty(), "no fractions given");
        }
        ensure!(
            self.test_fraction > 0.0 && self.test_fraction < 1.0,
            "test_fraction must lie in (0, 1)"
        );
        ensure!((0.0..=1.0).contains(&self.noise_fraction), "noise_fraction must lie in [0, 1]");
        ensure!(!self.c_grid.is_empty(), "empty C grid");
        ensure!(self.c_grid.iter().all(|&c| c > 0.0 && c.is_finite()), "C values must be positive");
        ensure!(!self.k_grid.is_empty(), "empty k grid");
        ensure!(self.n_queries >= 1, "n_queries must be at least 1");
        ensure!(self.cv_folds >= 2, "cv_folds must be at least 2");
        ensure!(self.case_study.top_k >= 1, "case_study.top_k must be at least 1");
        ensure!(self.case_study.bins >= 1, "case_study.bins must be at least 1");
        self.gbdt.validate()?;
        for g in &self.gbdt_grid {
            g.validate()?;
        }
        Ok(())
    }
}
