//! Spectral simulation and verification for parabolic evolution equations
//! driven by white noise that enters only through the boundary condition.
//!
//! The operator pair (boundary operator, its part in the closure of its domain)
//! is represented in the eigenbasis of the interior Laplacian: a nondecreasing
//! spectrum `mu_k` plus per-channel boundary coupling weights `b_{c,k}`. On that
//! representation every object of the integrated-semigroup theory has a closed
//! form, so the crate can:
//!
//! * apply resolvents, fractional powers, the integrated semigroup `S_A(t)` and
//!   its derivative ([`spectral_model`], [`semigroup`]);
//! * solve the deterministic Cauchy problem with exact per-mode exponential
//!   integrators ([`semigroup::voc_solve`]);
//! * check the resolvent decay and Hilbert-Schmidt integrability conditions
//!   numerically, with tail bounds and regression-based divergence verdicts
//!   ([`assumption_checker`]);
//! * simulate the truncated-noise approximation `X_N` and the exact
//!   Ornstein-Uhlenbeck solution, and measure `X_N -> X` ([`noise`], [`solver`]).

pub mod assumption_checker;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod path;
pub mod quad;
pub mod rng;
pub mod semigroup;
pub mod solver;
pub mod spectral_model;
pub mod stats;

pub use error::{Error, Result};
pub use path::{Provenance, SamplePath};
pub use spectral_model::{CoordVector, ModelKind, SpectralModel};
