//! Macroeconomic forecasting engine and pseudo-out-of-sample evaluation harness.
//!
//! The crate is organised along the forecasting pipeline:
//!
//! - [`panel`]: loading, stationarity transforms, standardization, EM balancing
//!   and synthetic panels.
//! - [`factors`]: principal-component factors, Bai-Ng `PC_p2` selection and
//!   marginal R² diagnostics.
//! - [`features`]: direct targets, lag blocks, MARX rotations and per-model
//!   design matrices.
//! - [`shrinkage`]: OLS, AR/ARDI with BIC, elastic net, kernel ridge.
//! - [`trees`]: regression trees, random forests and boosted trees.
//! - [`mrf`]: macroeconomic random forests with time-varying coefficients.
//! - [`nn`]: feed-forward networks trained with Adam.
//! - [`eval`]: expanding-window backtests, Diebold-Mariano tests and tables.

pub mod date;
pub mod error;
pub mod eval;
pub mod factors;
pub mod features;
pub mod linalg;
pub mod mrf;
pub mod nn;
pub mod panel;
pub mod rng;
pub mod shrinkage;
pub mod trees;

pub use date::YearMonth;
pub use error::{Error, Result};
