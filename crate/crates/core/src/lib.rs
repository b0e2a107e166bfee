//! Realizability-preserving discontinuous Galerkin solvers for entropy-based
//! moment closures of the slab-geometry linear kinetic equation.
//!
//! The crate is organised bottom-up:
//!
//! - [`quadrature`]: Gauss-Lobatto rules and the composite angular rule.
//! - [`basis`]: monomial, mixed and Legendre moment bases.
//! - [`entropy_solver`]: the dual optimisation problem and closure quantities.
//! - [`realizability`]: the quadrature polytope, membership and the scaling limiter.
//! - [`dg`]: the semidiscretisation, slope limiter and SSP(3,3) stepping.
//! - [`problems`]: manufactured solution, limiter test, plane source, two beams.
//! - [`harness`]: configuration, time loop, error norms and reports.

// `!(x >= y)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod dg;
pub mod entropy_solver;
mod error;
pub mod harness;
mod linalg;
pub mod problems;
pub mod quadrature;
pub mod realizability;

pub use error::{Error, Result};
