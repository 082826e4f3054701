#![no_std]
// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Numerical core for studying ill-posedness of nonparametric instrumental
//! variable regression under shape constraints.
//!
//! Everything here is pure computation over immutable inputs and builds
//! without `std` (an allocator is required). File formats, the experiment
//! runner and the CLI live in the companion `npivlab` crate.
//!
//! The pieces, bottom-up:
//!
//! - [`function_space`]: quadrature grids on `[0, 1]`, grid functions, `L²`
//!   and first-order Sobolev geometry, finite differences and shape checks.
//! - [`counterexamples`]: the shape-preserving perturbation sequences
//!   `ψ_n` along which the minimum-distance criterion collapses.
//! - [`dgp`]: copula data-generating processes with bounded densities, the
//!   reduced form and a seeded sampler.
//! - [`operator`]: the discretized conditional-expectation operator, the
//!   criterion `Q_∞`, its adjoint and singular value diagnostics.
//! - [`estimator`]: Tikhonov (Sobolev) estimation, the naive truncated-SVD
//!   solve, a shape-constrained least-squares QP and kernel plug-ins.

extern crate alloc;

pub mod counterexamples;
pub mod dgp;
mod error;
pub mod estimator;
pub mod function_space;
pub(crate) mod linalg;
pub mod normal;
pub mod operator;

pub use crate::error::{Error, Result};
