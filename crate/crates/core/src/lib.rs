//! Scenario-based and chance-constrained design under uncertainty.
//!
//! Designs are computed from a finite set of uncertainty scenarios, each
//! of which may be expanded into a cloud of perturbed points. Requirement
//! values are summarized per scenario with a piecewise-linear empirical
//! CDF, which gives quantile constraints that a gradient-based optimizer
//! can work with.

pub mod adaptive;
pub mod cli;
pub mod ecdf;
pub mod error;
pub mod formulations;
pub mod guide;
pub mod problems;
pub mod scenario;
pub mod solver;
pub mod uq;

pub use error::{Error, Result};
