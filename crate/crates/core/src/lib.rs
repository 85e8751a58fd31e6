//! Bayesian updating by conditional expectation.
//!
//! Random vectors are represented either as weighted ensembles or as
//! polynomial chaos expansions ([`rv`]). Conditional expectations are
//! approximated by Galerkin projection onto polynomials of the observation
//! ([`cond_expect`]), and the resulting maps drive the linear and nonlinear
//! filters in [`filters`]. [`models`] provides the dynamical systems used for
//! twin experiments.

pub mod basis;
pub mod cond_expect;
pub mod error;
pub mod filters;
pub mod linalg;
pub mod models;
pub mod rv;
pub mod seed;

pub use error::{Error, Result};
