//! Drift-adaptive online combination of multivariate forecasters.
//!
//! A cross-time forecaster (variables treated independently) and a
//! cross-variable forecaster (channels mixed) are trained online on their own
//! losses, and an online convex programming block combines them per
//! variable: exponentiated-gradient long-term weights plus a short-term bias
//! learned from the most recent outcome.
//!
//! Module map:
//!
//! - [`numerics`]: matrices, parameter sets, optimizers, finite-difference checks
//! - [`forecasters`]: the online experts and the instance-normalization wrapper
//! - [`ensemble`]: combination policies (EGD, K-step EGD, OCP block, baselines)
//! - [`regret`]: loss ledger and external / internal / interval regret
//! - [`stream`]: warm-up split, the online loop, delayed feedback
//! - [`data`]: CSV ingestion and synthetic drift generators
//! - [`experiment`]: config files, run reports, plot data, comparisons

pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod forecasters;
pub mod numerics;
pub mod regret;
pub mod stream;

pub use error::{Error, Result};
