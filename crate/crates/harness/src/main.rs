use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use leafrep::kernel::KernelKind;
use leafrep_harness::config::{Experiment, ExperimentConfig, Method};
use leafrep_harness::{experiments, synth};

#[derive(Parser)]
#[command(name = "leafrep", version, about = "Explain tree-ensemble predictions through the training data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Surrogate and TEKNN agreement with the ensemble on held-out rows.
    Fidelity(RunArgs),
    /// Test accuracy after checking flipped labels in each method's order.
    Cleaning(RunArgs),
    /// Remove the most supportive training rows and retrain.
    Roar(RunArgs),
    /// Setup and per-query explanation wall-clock cost.
    Runtime(RunArgs),
    /// Injected subgroup mismatch and its explanation.
    CaseStudy(RunArgs),
    /// Write the synthetic census-like dataset.
    GenerateData {
        #[arg(long, default_value_t = synth::DEFAULT_ROWS)]
        rows: usize,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset; defaults to the bundled synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long = "label-col")]
    label_col: Option<String>,
    /// Label value treated as the positive class.
    #[arg(long)]
    positive: Option<String>,
    /// Comma-separated kernel kinds: leafpath, treeoutput, leafoutput.
    #[arg(long, value_delimiter = ',')]
    kernel: Vec<KernelKind>,
    /// Comma-separated methods, e.g. TREX-KLR,random,teknn.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Comma-separated repetition seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = experiment;
        if let Some(d) = self.data {
            cfg.dataset_path = d;
        }
        if cfg.dataset_path.as_os_str().is_empty() {
            cfg.dataset_path = synth::BUNDLED_PATH.into();
        }
        if let Some(l) = self.label_col {
            cfg.label_column = l;
        }
        if let Some(p) = self.positive {
            cfg.positive_value = p;
        }
        if !self.kernel.is_empty() {
            cfg.kernels = self.kernel;
        }
        if !self.methods.is_empty() {
            cfg.methods = self.methods;
        }
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds;
        }
        if let Some(o) = self.out {
            cfg.output_dir = o;
        }
        cfg.resolve()
    }
}

fn run(cli: Cli) -> Result<()> {
    let (experiment, args) = match cli.command {
        Command::Fidelity(a) => (Experiment::Fidelity, a),
        Command::Cleaning(a) => (Experiment::Cleaning, a),
        Command::Roar(a) => (Experiment::Roar, a),
        Command::Runtime(a) => (Experiment::Runtime, a),
        Command::CaseStudy(a) => (Experiment::CaseStudy, a),
        Command::GenerateData { rows, seed, out } => {
            let people = synth::generate(rows, seed);
            std::fs::write(&out, synth::to_csv_string(&people))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
            return Ok(());
        }
    };
    let cfg = args.into_config(experiment)?;
    let written = experiments::run_and_write(&cfg)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
