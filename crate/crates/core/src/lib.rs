//! Instance-attribution explanations for gradient-boosted tree ensembles.
//!
//! The pipeline is:
//!
//! 1. [`data`] loads a labeled table and optionally corrupts it for experiments.
//! 2. [`gbdt`] trains a logistic-loss boosted ensemble of binary regression trees.
//! 3. [`kernel`] maps every instance to a sparse feature vector that records how
//!    the ensemble processed it (which leaves it reached, what values they hold).
//! 4. [`surrogate`] fits kernel logistic regression or an SVM in the dual on that
//!    kernel, against the ensemble's own predicted labels.
//! 5. [`explain`] turns the dual weights into global rankings and per-query
//!    decompositions of the surrogate decision value over the training rows.

pub mod data;
pub mod error;
pub mod explain;
pub mod gbdt;
pub mod kernel;
pub mod stats;
pub mod surrogate;

pub use data::{CorruptionRecord, CsvOptions, Dataset};
pub use error::{Error, Result};
pub use explain::{Explanation, Ordering, Teknn};
pub use gbdt::{GbdtConfig, TreeEnsemble, TreeNode};
pub use kernel::{FeatureMap, KernelKind, KernelRep};
pub use surrogate::{Family, FidelityReport, SolverOptions, SurrogateModel};
