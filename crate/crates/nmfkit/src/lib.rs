//! A nonnegative matrix factorization toolkit.
//!
//! Approximates a nonnegative data matrix `X` by a low-rank product `W H`
//! with both factors elementwise nonnegative. The crate provides:
//!
//! - the standard two-block coordinate-descent solvers (multiplicative
//!   updates, projected ALS, exact ANLS, and HALS) under one framework
//!   with shared stopping rules and error/KKT traces ([`solvers`]);
//! - an exact active-set NNLS with projected-gradient fallback ([`nnls`]);
//! - first-order optimality diagnostics and factor balancing ([`objective`]);
//! - initializers: seeded random, nonnegative SVD split, k-means, and
//!   column subset selection ([`init`]);
//! - the successive projection algorithm for near-separable data, with a
//!   refinement pass and anchor-based recovery of `H` ([`separable`]);
//! - seeded synthetic generators and a CSV benchmark harness that runs all
//!   algorithms from shared initializations under a common time budget
//!   ([`generate`], [`bench`]);
//! - Matrix Market I/O for dense and sparse matrices ([`matrix::market`]).

// indexed loops mirror the subscripted matrix arithmetic throughout
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod generate;
pub mod init;
pub mod linalg;
pub mod matrix;
pub mod nnls;
pub mod objective;
pub mod separable;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::{frobenius_error, normalize_columns_l1, ColumnSelection, Csc, Dense, Matrix};
pub use objective::{
    balance_factors, gradient_h, gradient_w, kkt_residual, kkt_residual_balanced,
    optimal_scaling, Factorization, KktReport,
};
pub use solvers::{run_cd, SolverConfig, Trace, TracePoint, UpdateRule};
