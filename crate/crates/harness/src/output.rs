//! Output directory layout: `results.csv`, `raw/`, `plots/`, `meta.json`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, SeedOffsets, SEED_OFFSETS};

/// Shortest round-trip decimal; `None` renders as an empty cell.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Everything an experiment writes, keyed by path relative to the output
/// directory.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub results: Option<Table>,
    pub tables: Vec<(String, Table)>,
    pub plots: Vec<(String, String)>,
    /// `(seed, ensemble fingerprint)` per repetition.
    pub fingerprints: Vec<(u64, String)>,
}

impl Artifacts {
    pub fn raw(&mut self, seed: u64, table: Table) {
        self.tables.push((format!("raw/seed_{seed}.csv"), table));
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    config: &'a ExperimentConfig,
    seed_offsets: SeedOffsets,
    fingerprints: Vec<FingerprintEntry<'a>>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct FingerprintEntry<'a> {
    seed: u64,
    ensemble: &'a str,
}

/// Writes all artifacts under `dir` and returns the written paths.
pub fn write(dir: &Path, config: &ExperimentConfig, art: &Artifacts) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<(String, String)> = vec![];
    if let Some(results) = &art.results {
        entries.push(("results.csv".into(), results.to_csv()));
    }
    for (rel, table) in &art.tables {
        entries.push((rel.clone(), table.to_csv()));
    }
    for (name, svg) in &art.plots {
        entries.push((format!("plots/{name}"), svg.clone()));
    }
    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.to_string(),
        config,
        seed_offsets: SEED_OFFSETS,
        fingerprints: art
            .fingerprints
            .iter()
            .map(|(seed, f)| FingerprintEntry { seed: *seed, ensemble: f })
            .collect(),
        files: entries.iter().map(|(rel, _)| rel.clone()).collect(),
    };
    entries.push(("meta.json".into(), serde_json::to_string_pretty(&meta)? + "\n"));

    std::fs::create_dir_all(dir.join("raw"))?;
    std::fs::create_dir_all(dir.join("plots"))?;
    let mut written = vec![];
    for (rel, body) in entries {
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
