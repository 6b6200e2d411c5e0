//! Credit-default classifiers behind a single probability contract, with
//! model-agnostic explanations: tabular LIME, Kernel SHAP (plus an exact
//! enumeration oracle), ALE curves, and plot-ready comparison exports.
//! Everything is seed-deterministic end to end.

pub mod ale;
pub mod cli;
pub mod dataset;
pub mod experiments;
pub mod export;
pub mod lime;
pub mod model;
pub mod shap;
pub mod util;

pub use util::matrix::Matrix;
