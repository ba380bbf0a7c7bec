//! Cross-market transfer dynamic pricing.
//!
//! A seller posts prices in a target market whose buyers have utility
//! `g(x) + ε` for covariates `x` and logistic noise `ε`. Source markets with
//! similar utilities feed a bias-corrected aggregation estimator, and the
//! simulator measures the resulting revenue regret against target-only
//! learning.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod environment;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod noise;
pub mod policies;
pub mod presets;
pub mod report;
pub mod simulator;

pub use config::{ConfigError, ExperimentConfig};
pub use error::{Error, Result};
pub use noise::{NoiseModel, PriceMap};
pub use policies::{PolicyKind, PolicyState};
pub use simulator::{run_replicated, run_single, AggregateStats, RunResult};
