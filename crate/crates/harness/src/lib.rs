//! Experiment harness: configuration, the five experiments, and their
//! CSV/SVG/JSON outputs.

pub mod config;
pub mod curve;
pub mod experiments;
pub mod output;
pub mod pipeline;
pub mod svg;
pub mod synth;

pub use config::{Experiment, ExperimentConfig, Method};
