//! Benchmarking regressors that predict technical-debt remediation effort
//! from static-analysis snapshots, plus a model of debt-item lifecycles.
//!
//! Pipeline: [`ingest`] snapshots → [`features`] design matrix →
//! [`regress`] models → [`eval`] cross-validation → [`dropcol`] importance.
//! [`lifecycle`] is independent of the regression pipeline.

pub mod features;
pub mod ingest;
pub mod matrix;
pub mod regress;
pub mod rng;
pub mod eval;
pub mod dropcol;
pub mod lifecycle;
pub mod synth;
pub mod cli;
