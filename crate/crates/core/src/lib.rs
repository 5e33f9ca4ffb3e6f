//! Streaming second-order optimization for binary logistic regression.
//!
//! The crate implements the hybrid stochastic Newton (HSN) family of
//! algorithms — HSN itself plus the SGD, SN, TSN and ONS baselines — as
//! single-sample streaming state machines, together with the ground-truth
//! oracles and statistical diagnostics needed to verify their asymptotic
//! behaviour (almost-sure convergence, log(n)/n rates, the central limit
//! theorem and the quadratic strong law) at desk scale.
//!
//! Layout:
//! - [`linalg`]: dense symmetric-matrix kernel (rank-1 inverse maintenance
//!   plus a direct-inversion oracle),
//! - [`model`]: logistic-regression primitives (link, per-sample
//!   coefficients, loss),
//! - [`optim`]: the streaming optimizers,
//! - [`oracle`]: ground-truth quantities (Monte-Carlo Hessian estimates,
//!   batch Newton reference fits, excess risk),
//! - [`data`]: seeded synthetic streams and CSV ingestion,
//! - [`experiments`]: replication orchestration and theorem diagnostics.

pub mod data;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod seed;

pub use error::{Error, Result};
