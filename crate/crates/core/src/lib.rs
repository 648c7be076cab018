//! Orthonormal polynomial surrogates for black-box functions of correlated,
//! non-Gaussian random inputs described by Gaussian mixtures.
//!
//! The pipeline is:
//!
//! 1. [`gmm`] describes the input law (mixture blocks, Gaussian or gamma
//!    marginals) and draws candidate samples.
//! 2. [`moments`] computes exact monomial moments `E[ξ^α]` by functional
//!    tensor trains over the whitened Gaussian variables.
//! 3. [`basis`] turns the moment matrix into an orthonormal basis
//!    `Ψ(ξ) = L⁻¹ b(ξ)` via a Cholesky factorization.
//! 4. [`sparse`] recovers sparse coefficients with CoSaMP.
//! 5. [`sampler`] picks informative simulation points (RRQR start, then
//!    D-, R-, E-optimal or hybrid acquisition).
//! 6. [`surrogate`] packages the expansion with closed-form statistics,
//!    error metrics and density estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod gmm;
pub mod indexing;
pub mod linalg;
pub mod moments;
pub mod sampler;
pub mod sparse;
pub mod surrogate;

pub use error::{Error, Result};
