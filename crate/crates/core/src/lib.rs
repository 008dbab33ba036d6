//! Spatially deconfounded causal effect estimation for continuous treatments.
//!
//! The pipeline ingests unit-level tabular data together with an adjacency
//! graph over the units, builds graph-spectral basis functions (Moran
//! eigenvector maps or ICAR precision eigenvectors), fits selectively
//! penalized Lasso nuisance models, and combines them into a cross-fitted
//! doubly robust effect estimate with influence-function standard errors
//! and residual spatial-autocorrelation diagnostics.

pub mod basis;
pub mod cli;
pub mod config;
pub mod crossfit;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod gps;
pub mod graph;
pub mod lasso;
pub mod synthetic;

pub use error::{Error, Result};
